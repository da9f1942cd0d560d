"""Synthetic photon datasets from a decay model.

Generation follows the acquisition model: per-species photon counts are
Poisson with mean T*I_k (noise included), each photon's delay is drawn
from that species' density, and the pooled delays are returned with
species labels discarded.

Randomness comes from counter-based Philox streams keyed by
``(seed, purpose, species)``, so species can be generated independently
(or in parallel) with bit-reproducible output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import DecayModel, PhotonDataset

_COUNTS_KEY = 0
_TIMES_KEY = 1
_SHUFFLE_KEY = 2


def stream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic Philox generator for the given seed and key path."""
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence(seed, spawn_key=tuple(key))))


def substream_seed(seed: int, *key: int) -> int:
    """Derive a child integer seed; used to give every Monte Carlo trial
    its own root so scheduling order cannot change results."""
    return int(np.random.SeedSequence(seed, spawn_key=tuple(key))
               .generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SimulationSpec:
    """What to simulate.

    ``count_mode="poisson"`` draws per-species Poisson counts with mean
    pulse_count * I_k (the acquisition model). ``count_mode="fixed"``
    conditions on exactly ``total`` photons, each assigned a species
    with probability pi_k; this variant exists for fixed-sample-size
    discrimination experiments, not as an acquisition model.
    """

    model: DecayModel
    pulse_count: float
    count_mode: str = "poisson"
    total: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.pulse_count <= 0:
            raise ValueError("pulse_count must be > 0")
        if self.count_mode not in ("poisson", "fixed"):
            raise ValueError("count_mode must be 'poisson' or 'fixed'")
        if self.count_mode == "fixed":
            if self.total is None or self.total < 0:
                raise ValueError("fixed count mode needs total >= 0")
        elif self.total is not None:
            raise ValueError("total is only meaningful in fixed count mode")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


def sample_counts(model: DecayModel, pulse_count: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Independent Poisson photon counts [n_0, n_1, ..., n_K], noise first."""
    if pulse_count <= 0:
        raise ValueError("pulse_count must be > 0")
    means = pulse_count * np.concatenate(
        [[model.noise_intensity], model.intensities])
    return rng.poisson(means)


def truncated_exponential_quantile(u, rate: float, period: float):
    """Inverse CDF of the truncated exponential on [0, period).

    t(u) = -log(1 - u * (1 - e^{-rate*period})) / rate for u in [0, 1).
    """
    if rate <= 0 or period <= 0:
        raise ValueError("rate and period must be positive")
    u = np.asarray(u, dtype=float)
    span = -np.expm1(-rate * period)
    t = -np.log1p(-u * span) / rate
    # Guard the open right end against rounding.
    return np.minimum(t, np.nextafter(period, 0.0))


def sample_truncated_exponential(rate: float, period: float,
                                 rng: np.random.Generator,
                                 size: int | None = None):
    """Draw truncated-exponential delays via the inverse CDF."""
    u = rng.random(size)
    return truncated_exponential_quantile(u, rate, period)


def _species_times(model: DecayModel, counts: np.ndarray,
                   seed: int) -> list[np.ndarray]:
    """Per-species delay arrays (noise first), one stream per species."""
    out = []
    for k, n_k in enumerate(counts):
        rng = stream(seed, _TIMES_KEY, k)
        n_k = int(n_k)
        if k == 0:
            out.append(model.period * rng.random(n_k))
        else:
            out.append(sample_truncated_exponential(
                model.species[k - 1].rate, model.period, rng, n_k))
    return out


def sample_dataset_with_counts(
        spec: SimulationSpec) -> tuple[PhotonDataset, np.ndarray]:
    """As :func:`sample_dataset`, but also report the per-species counts
    (noise first). The counts never enter the dataset itself."""
    model = spec.model
    if spec.count_mode == "poisson":
        counts = sample_counts(model, spec.pulse_count,
                               stream(spec.seed, _COUNTS_KEY))
    else:
        pi = model.proportions()
        counts = stream(spec.seed, _COUNTS_KEY).multinomial(spec.total, pi)
    parts = _species_times(model, counts, spec.seed)
    pooled = np.concatenate(parts) if parts else np.empty(0)
    order = stream(spec.seed, _SHUFFLE_KEY).permutation(pooled.size)
    return (PhotonDataset(times=pooled[order], period=model.period,
                          pulse_count=spec.pulse_count),
            counts)


def sample_dataset(spec: SimulationSpec) -> PhotonDataset:
    """Pooled photon delays with species labels discarded and output
    order shuffled (downstream code must not exploit generation order)."""
    dataset, _ = sample_dataset_with_counts(spec)
    return dataset


def sample_times(model: DecayModel, size, rng: np.random.Generator) -> np.ndarray:
    """iid draws from the mixture density, any output shape.

    Fast path for Monte Carlo over many fixed-size datasets: photons are
    assigned a component by one uniform draw and transformed by that
    component's inverse CDF with a second.
    """
    pi = model.proportions()
    edges = np.cumsum(pi)
    comp = np.searchsorted(edges, rng.random(size), side="right")
    comp = np.minimum(comp, len(pi) - 1)  # guard u == 1 - ulp edge
    u = rng.random(size)
    out = np.empty(np.shape(u))
    mask = comp == 0
    out[mask] = model.period * u[mask]
    for k, s in enumerate(model.species, start=1):
        mask = comp == k
        out[mask] = truncated_exponential_quantile(u[mask], s.rate, model.period)
    return out
