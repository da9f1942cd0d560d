import hypothesis
import numpy as np
import pytest
from hypothesis import strategies as st

from flimsel import DecayModel, PhotonDataset, SpeciesParams

hypothesis.settings.register_profile(
    "suite", max_examples=50, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("suite")

RATE_LO, RATE_HI = 1.0 / 30.0, 1.0 / 0.03


def rates_strategy():
    # log-uniform over the lifetime box, away from the edges by a hair
    return st.floats(min_value=np.log(RATE_LO * 1.0001),
                     max_value=np.log(RATE_HI * 0.9999)).map(np.exp)


def intensities_strategy():
    return st.floats(min_value=1e-6, max_value=0.1)


@st.composite
def models_strategy(draw, max_k=2, allow_k0=False, period=12.0):
    k = draw(st.integers(min_value=0 if allow_k0 else 1, max_value=max_k))
    species = tuple(SpeciesParams(draw(rates_strategy()),
                                  draw(intensities_strategy()))
                    for _ in range(k))
    noise = draw(st.floats(min_value=0.001 if k == 0 else 0.0, max_value=0.01))
    return DecayModel(species=species, noise_intensity=noise, period=period)


@st.composite
def datasets_strategy(draw, max_n=50, period=12.0):
    times = draw(st.lists(
        st.floats(min_value=0.0, max_value=period, exclude_max=True),
        min_size=0, max_size=max_n))
    pulses = draw(st.floats(min_value=1e3, max_value=1e7))
    return PhotonDataset(times=np.array(times), period=period,
                         pulse_count=pulses)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


def random_model(rng, k, pulse_count=1e6, expected_photons=1000.0,
                 noise_photons=10.0, period=12.0):
    """Random in-box model scaled to an expected photon budget. Mixture
    weights are floored at 2% so no species is numerically absent."""
    rates = np.exp(rng.uniform(np.log(RATE_LO * 1.05), np.log(RATE_HI * 0.95),
                               size=k))
    weights = np.maximum(rng.dirichlet(np.ones(k)), 0.02)
    weights /= weights.sum()
    signal = expected_photons - noise_photons
    species = tuple(SpeciesParams(r, w * signal / pulse_count)
                    for r, w in zip(rates, weights))
    return DecayModel(species=species,
                      noise_intensity=noise_photons / pulse_count,
                      period=period)
