"""Decay-model parameterization: truncated-exponential species, uniform
noise, and their mixtures.

Times are in nanoseconds everywhere; rates in 1/ns; intensities in
expected photons per excitation pulse. Arrival times live on [0, r)
where r is the pulse period, because a photon's parent pulse is unknown
and only the delay modulo r is observed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateModelError, NoSignalError

#: Default period between consecutive excitation pulses (ns).
DEFAULT_PULSE_PERIOD_NS = 12.0

#: Physically admissible mean lifetimes (ns). Lifetimes are sure to sit
#: between the instrument-response scale (0.03 ns) and a few pulse
#: periods (30 ns), which keeps the parameter set compact.
LIFETIME_BOUNDS_NS = (0.03, 30.0)

#: Corresponding decay-rate box (1/ns), low to high.
RATE_BOUNDS = (1.0 / LIFETIME_BOUNDS_NS[1], 1.0 / LIFETIME_BOUNDS_NS[0])


@dataclass(frozen=True)
class SpeciesParams:
    """One exponential decay component.

    Parameters
    ----------
    rate : float
        Inverse mean lifetime (1/ns). Must lie in the compact box
        ``RATE_BOUNDS``.
    intensity : float
        Expected detected photons per pulse from this species (>= 0).
    """

    rate: float
    intensity: float

    def __post_init__(self):
        if not np.isfinite(self.rate) or not np.isfinite(self.intensity):
            raise ValueError("species rate and intensity must be finite")
        lo, hi = RATE_BOUNDS
        # Tiny slack so box-boundary optimizer output round-trips.
        if not (lo * (1 - 1e-12) <= self.rate <= hi * (1 + 1e-12)):
            raise ValueError(
                f"rate {self.rate} outside [{lo:.6g}, {hi:.6g}] 1/ns "
                f"(lifetime box {LIFETIME_BOUNDS_NS} ns)"
            )
        if self.intensity < 0:
            raise ValueError("intensity must be >= 0")

    @property
    def lifetime(self) -> float:
        """Mean lifetime 1/rate in ns."""
        return 1.0 / self.rate


@dataclass(frozen=True)
class DecayModel:
    """A K-species decay model plus uniform noise of known intensity.

    Species are stored sorted by decreasing rate (shortest lifetime
    first). The sort is applied at construction so that every mixture
    has a unique canonical representation regardless of input order.
    """

    species: tuple[SpeciesParams, ...] = ()
    noise_intensity: float = 0.0
    period: float = DEFAULT_PULSE_PERIOD_NS

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(
            sorted(self.species, key=lambda s: -s.rate)))
        if not np.isfinite(self.period) or self.period <= 0:
            raise ValueError("pulse period must be a positive finite duration")
        if self.noise_intensity < 0 or not np.isfinite(self.noise_intensity):
            raise ValueError("noise intensity must be finite and >= 0")
        if self.total_intensity <= 0:
            raise DegenerateModelError(
                "total intensity must be positive (no photon source)")

    @property
    def k(self) -> int:
        """Number of exponential species."""
        return len(self.species)

    @property
    def total_intensity(self) -> float:
        """I = I_0 + sum_k I_k, expected photons per pulse."""
        return self.noise_intensity + sum(s.intensity for s in self.species)

    @property
    def rates(self) -> np.ndarray:
        return np.array([s.rate for s in self.species])

    @property
    def intensities(self) -> np.ndarray:
        return np.array([s.intensity for s in self.species])

    @property
    def lifetimes(self) -> np.ndarray:
        return np.array([s.lifetime for s in self.species])

    def proportions(self) -> np.ndarray:
        """[pi_0, pi_1, ..., pi_K] with pi_k = I_k / I; sums to 1."""
        total = self.total_intensity
        return np.concatenate(
            [[self.noise_intensity / total], self.intensities / total])

    def to_dict(self) -> dict:
        return {
            "period_ns": self.period,
            "noise_per_pulse": self.noise_intensity,
            "species": [
                {"rate_per_ns": s.rate, "intensity_per_pulse": s.intensity}
                for s in self.species
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DecayModel":
        return cls(
            species=tuple(
                SpeciesParams(s["rate_per_ns"], s["intensity_per_pulse"])
                for s in payload["species"]
            ),
            noise_intensity=payload["noise_per_pulse"],
            period=payload["period_ns"],
        )


@dataclass(frozen=True)
class PhotonDataset:
    """Observed photon delays modulo the pulse period.

    Parameters
    ----------
    times : array of float
        Arrival times in ns, each in [0, period).
    period : float
        Pulse period in ns.
    pulse_count : float
        Number of excitation pulses T during acquisition (> 0).
    """

    times: np.ndarray
    period: float = DEFAULT_PULSE_PERIOD_NS
    pulse_count: float = 1.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if not np.all(np.isfinite(times)):
            raise ValueError("times must be finite")
        if self.period <= 0 or not np.isfinite(self.period):
            raise ValueError("pulse period must be positive and finite")
        if times.size and (times.min() < 0 or times.max() >= self.period):
            raise ValueError("all times must lie in [0, period)")
        if not self.pulse_count > 0:
            raise ValueError("pulse_count must be > 0")
        times = times.copy()
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @property
    def n(self) -> int:
        return self.times.size


def component_density(rate: float, period: float, t) -> float | np.ndarray:
    """Density of one truncated-exponential species on [0, period).

    ``rate * exp(-rate * t) / (1 - exp(-rate * period))`` inside the
    support and 0 outside. Accepts scalar or array ``t``.
    """
    if not np.isfinite(rate) or rate <= 0:
        raise ValueError("rate must be positive and finite")
    if not np.isfinite(period) or period <= 0:
        raise ValueError("period must be positive and finite")
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)):
        raise ValueError("t must be finite")
    inside = (t_arr >= 0) & (t_arr < period)
    norm = -np.expm1(-rate * period)
    dens = np.where(inside, rate * np.exp(-rate * np.where(inside, t_arr, 0.0)) / norm, 0.0)
    return float(dens) if np.isscalar(t) or t_arr.ndim == 0 else dens


def noise_density(period: float, t) -> float | np.ndarray:
    """Uniform noise density: 1/period on [0, period), 0 elsewhere."""
    if not np.isfinite(period) or period <= 0:
        raise ValueError("period must be positive and finite")
    t_arr = np.asarray(t, dtype=float)
    inside = (t_arr >= 0) & (t_arr < period)
    dens = np.where(inside, 1.0 / period, 0.0)
    return float(dens) if np.isscalar(t) or t_arr.ndim == 0 else dens


def mixture_density(model: DecayModel, t) -> float | np.ndarray:
    """Mixture density g(t) = sum_k pi_k f_k(t), noise included as k=0."""
    total = model.total_intensity
    if total <= 0:
        raise DegenerateModelError("mixture undefined for zero total intensity")
    t_arr = np.asarray(t, dtype=float)
    g = (model.noise_intensity / total) * noise_density(model.period, t_arr)
    for s in model.species:
        g = g + (s.intensity / total) * component_density(s.rate, model.period, t_arr)
    return float(g) if np.isscalar(t) or t_arr.ndim == 0 else g


def signal_proportions(model: DecayModel) -> np.ndarray:
    """Proportions pi'_k = I_k / (I - I_0) among signal species only."""
    signal = model.total_intensity - model.noise_intensity
    if signal <= 0:
        raise NoSignalError("model has no signal species intensity")
    return model.intensities / signal


def amplitude_fraction(pi1_prime: float, lifetime1: float, lifetime2: float) -> float:
    """Amplitude-weighted fraction of species 1 in a two-species mix.

    Initial decay amplitudes scale like (proportion / lifetime), so

        eta_1 = (pi'_1 / tau_1) / (pi'_1 / tau_1 + pi'_2 / tau_2)

    with pi'_2 = 1 - pi'_1. This is the reparameterization under which
    the signal-proportion grid {0, .077, .2, .43, 1} at lifetimes
    (0.6, 2.4) ns maps to eta_1 = {0, .25, .5, .75, 1}.
    """
    if not 0 <= pi1_prime <= 1:
        raise ValueError("pi1_prime must lie in [0, 1]")
    if lifetime1 <= 0 or lifetime2 <= 0:
        raise ValueError("lifetimes must be positive")
    a1 = pi1_prime / lifetime1
    a2 = (1.0 - pi1_prime) / lifetime2
    return a1 / (a1 + a2)
