import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import cumulative_trapezoid
from scipy.stats import kstest

from flimsel import (DecayModel, SimulationSpec, SpeciesParams,
                     mixture_density, sample_counts, sample_dataset,
                     sample_times, sample_truncated_exponential,
                     truncated_exponential_quantile)
from flimsel.simulate import stream, substream_seed

R = 12.0

# frozen 40-digit truncated means 1/a - r e^{-ar}/(1 - e^{-ar})
TRUNC_MEAN = {2.4: 2.3185961411243492, 0.6: 0.59999997526615648}


def numeric_mixture_cdf(model, grid_points=2 ** 18):
    """CDF oracle by numerical integration of the mixture density."""
    t = np.linspace(0.0, model.period, grid_points)
    t[-1] = np.nextafter(model.period, 0)
    pdf = mixture_density(model, t)
    cdf = cumulative_trapezoid(pdf, t, initial=0.0)
    cdf /= cdf[-1]
    return lambda x: np.interp(x, t, cdf)


class TestCounts:
    def test_zero_intensity_species_never_emits(self, rng):
        m = DecayModel(species=(SpeciesParams(1 / 2.4, 0.0),),
                       noise_intensity=0.01)
        counts = np.array([sample_counts(m, 100.0, stream(5, 9, i))
                           for i in range(200)])
        assert np.all(counts[:, 1] == 0)

    def test_poisson_moments(self):
        m = DecayModel(species=(SpeciesParams(1 / 2.4, 9.0),),
                       noise_intensity=1.0)
        reps = 10_000
        rng = stream(2024, 0)
        counts = np.array([sample_counts(m, 100.0, rng) for _ in range(reps)])
        species = counts[:, 1].astype(float)  # mean 900
        assert abs(species.mean() - 900.0) < 3 * np.sqrt(900.0 / reps)
        ratio = species.var(ddof=1) / species.mean()
        assert 0.95 < ratio < 1.05
        totals = counts.sum(axis=1).astype(float)  # Poisson(1000)
        assert abs(totals.mean() - 1000.0) < 3 * np.sqrt(1000.0 / reps)


class TestTruncatedExponential:
    def test_quantile_endpoints(self):
        assert truncated_exponential_quantile(0.0, 1 / 2.4, R) == 0.0
        near_one = np.nextafter(1.0, 0.0)
        t = truncated_exponential_quantile(near_one, 1 / 2.4, R)
        assert 0 < t < R

    @given(st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
           st.floats(min_value=1 / 30, max_value=1 / 0.03))
    def test_quantile_stays_in_support(self, u, rate):
        t = truncated_exponential_quantile(u, rate, R)
        assert 0 <= t < R

    @pytest.mark.parametrize("tau", [2.4, 0.6])
    def test_empirical_mean_matches_closed_form(self, tau):
        rng = stream(99, int(tau * 10))
        draws = sample_truncated_exponential(1 / tau, R, rng, 1_000_000)
        assert draws.min() >= 0 and draws.max() < R
        se = draws.std(ddof=1) / np.sqrt(draws.size)
        assert abs(draws.mean() - TRUNC_MEAN[tau]) < 3 * se

    @pytest.mark.parametrize("tau", [2.4, 0.6])
    def test_kolmogorov_smirnov_frozen_seeds(self, tau):
        rate = 1 / tau
        span = -np.expm1(-rate * R)
        cdf = lambda x: -np.expm1(-rate * x) / span
        passed = 0
        for seed in range(10):
            rng = stream(1234 + seed, 0)
            draws = sample_truncated_exponential(rate, R, rng, 100_000)
            if kstest(draws, cdf).pvalue > 1e-3:
                passed += 1
        assert passed >= 9


class TestSampleDataset:
    def test_noise_only_fixed_total(self):
        m = DecayModel(species=(), noise_intensity=0.01)
        spec = SimulationSpec(model=m, pulse_count=1000.0,
                              count_mode="fixed", total=5, seed=4)
        ds = sample_dataset(spec)
        assert ds.n == 5
        assert np.all((ds.times >= 0) & (ds.times < R))

    def test_fixed_total_exact_count(self):
        m = DecayModel(species=(SpeciesParams(1 / 0.6, 0.3),
                                SpeciesParams(1 / 2.4, 0.6)),
                       noise_intensity=0.1)
        for n in (0, 1, 17, 400):
            ds = sample_dataset(SimulationSpec(
                model=m, pulse_count=100.0, count_mode="fixed", total=n,
                seed=n))
            assert ds.n == n

    def test_poisson_mode_mean_photon_budget(self):
        # 1000 expected photons of which 100 noise
        pulses = 1e6
        m = DecayModel(species=(SpeciesParams(1 / 0.6, 0.43 * 900 / pulses),
                                SpeciesParams(1 / 2.4, 0.57 * 900 / pulses)),
                       noise_intensity=100 / pulses)
        sizes = [sample_dataset(SimulationSpec(
            model=m, pulse_count=pulses, seed=s)).n for s in range(100)]
        se = np.sqrt(1000.0 / 100)
        assert abs(np.mean(sizes) - 1000.0) < 3 * se

    def test_determinism(self):
        m = DecayModel(species=(SpeciesParams(1 / 2.4, 0.001),),
                       noise_intensity=0.0001)
        spec = SimulationSpec(model=m, pulse_count=1e5, seed=42)
        a = sample_dataset(spec)
        b = sample_dataset(spec)
        assert np.array_equal(a.times, b.times)
        assert a.pulse_count == b.pulse_count

    def test_every_time_in_support(self):
        m = DecayModel(species=(SpeciesParams(1 / 0.03, 0.002),
                                SpeciesParams(1 / 30.0, 0.002)),
                       noise_intensity=0.001)
        ds = sample_dataset(SimulationSpec(model=m, pulse_count=1e6, seed=1))
        assert ds.times.min() >= 0
        assert ds.times.max() < R

    def test_pooled_times_match_mixture_distribution(self):
        # KS against a numerically integrated mixture CDF, frozen seeds
        pulses = 1e6
        m = DecayModel(species=(SpeciesParams(1 / 0.6, 0.3 * 1e5 / pulses),
                                SpeciesParams(1 / 2.4, 0.6 * 1e5 / pulses)),
                       noise_intensity=0.1 * 1e5 / pulses)
        cdf = numeric_mixture_cdf(m)
        passed = 0
        for seed in range(10):
            ds = sample_dataset(SimulationSpec(model=m, pulse_count=pulses,
                                               seed=777 + seed))
            if kstest(ds.times, cdf).pvalue > 1e-3:
                passed += 1
        assert passed >= 9

    def test_sample_times_matches_mixture_distribution(self):
        m = DecayModel(species=(SpeciesParams(1 / 0.6, 0.25),
                                SpeciesParams(1 / 2.4, 0.65)),
                       noise_intensity=0.10)
        cdf = numeric_mixture_cdf(m)
        draws = sample_times(m, (100_000,), stream(31, 0))
        assert kstest(draws, cdf).pvalue > 1e-3
        assert draws.min() >= 0 and draws.max() < R

    def test_spec_validation(self):
        m = DecayModel(species=(SpeciesParams(1 / 2.4, 0.001),))
        with pytest.raises(ValueError):
            SimulationSpec(model=m, pulse_count=0.0, seed=1)
        with pytest.raises(ValueError):
            SimulationSpec(model=m, pulse_count=10.0, count_mode="fixed",
                           seed=1)
        with pytest.raises(ValueError):
            SimulationSpec(model=m, pulse_count=10.0, total=5, seed=1)
        with pytest.raises(ValueError):
            SimulationSpec(model=m, pulse_count=10.0, seed=-3)


class TestStreams:
    def test_substream_seed_deterministic_and_distinct(self):
        a = substream_seed(7, 1, 2)
        assert a == substream_seed(7, 1, 2)
        assert a != substream_seed(7, 1, 3)
        assert a != substream_seed(7, 2, 2)
        assert a != substream_seed(8, 1, 2)

    def test_streams_independent_of_call_order(self):
        x = stream(5, 0).random(3)
        _ = stream(5, 1).random(1000)
        y = stream(5, 0).random(3)
        assert np.array_equal(x, y)
