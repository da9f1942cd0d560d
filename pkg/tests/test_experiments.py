import json
from pathlib import Path

import numpy as np
import pytest

from flimsel import ExperimentPlan, plan_from_manifest
from flimsel.experiments import (EXPERIMENT_PULSE_COUNT, limits_case_a,
                                 limits_case_b, run, scenario_closer_lifetimes,
                                 scenario_table2)
from flimsel.schemas import validate_payload

FIXTURES = Path(__file__).parent / "fixtures"


class TestScenarioTable2:
    @pytest.mark.parametrize("photons", [1000, 10000, 100000])
    def test_frozen_fixture_byte_identical(self, photons):
        got = json.dumps([s.to_dict() for s in scenario_table2(float(photons))],
                         indent=2, sort_keys=True) + "\n"
        want = (FIXTURES / f"table2_scenarios_{photons}.json").read_text()
        assert got == want

    def test_structure_and_bookkeeping(self):
        scenarios = scenario_table2(1000.0)
        assert len(scenarios) == 5
        assert [s.pi1_prime for s in scenarios] == [0.0, 0.077, 0.2, 0.43, 1.0]
        for s in scenarios:
            # exact expected-count bookkeeping
            assert s.pulse_count * s.model.noise_intensity == 100.0
            signal = (s.model.total_intensity - s.model.noise_intensity)
            assert s.pulse_count * signal == pytest.approx(900.0, rel=1e-12)
            assert s.true_k == (1 if s.pi1_prime in (0.0, 1.0) else 2)

    def test_zero_proportion_scenario_has_single_long_species(self):
        s = scenario_table2(1000.0)[0]
        assert s.model.k == 1
        assert s.model.lifetimes[0] == pytest.approx(2.4)

    def test_unit_proportion_scenario_has_single_short_species(self):
        s = scenario_table2(1000.0)[-1]
        assert s.model.k == 1
        assert s.model.lifetimes[0] == pytest.approx(0.6)


class TestScenarioCloserLifetimes:
    def test_brackets_with_mono_ends(self):
        scenarios = scenario_closer_lifetimes(10_000.0, 0.25)
        assert [s.true_k for s in scenarios] == [1, 2, 1]
        assert [s.pi1_prime for s in scenarios] == [0.0, 0.25, 1.0]

    def test_noise_ratio_bookkeeping(self):
        scenarios = scenario_closer_lifetimes(10_000.0, 0.5,
                                              noise_to_signal=0.01)
        for s in scenarios:
            noise = s.expected_noise_photons
            signal = s.expected_photons - noise
            assert noise / signal == pytest.approx(0.01, rel=1e-12)
            assert s.expected_photons == pytest.approx(10_000.0, rel=1e-12)

    def test_lifetimes(self):
        bi = scenario_closer_lifetimes(1000.0, 0.5)[1]
        assert bi.model.lifetimes.tolist() == [1.0, 2.0]


class TestLimitsCases:
    def test_case_a_models(self):
        prob = limits_case_a()
        assert prob.photon_count == 32
        assert prob.model_a.k == 1
        assert prob.model_a.lifetimes[0] == pytest.approx(2.4)
        assert prob.model_b.k == 2
        pi0 = prob.model_b.noise_intensity / prob.model_b.total_intensity
        assert pi0 == pytest.approx(1 / 11)
        from flimsel import signal_proportions
        assert np.allclose(signal_proportions(prob.model_b), [0.077, 0.923])

    def test_case_b_models(self):
        prob = limits_case_b()
        assert prob.model_a.noise_intensity == 0.0
        assert prob.model_b.lifetimes.tolist() == [2.5, 2.7]
        assert np.allclose(prob.model_b.intensities, [0.5, 0.5])


class TestRun:
    def test_unknown_generator_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            ExperimentPlan(name="x", generator="tableau", output_dir=tmp_path)

    def test_calibration_plan_outputs(self, tmp_path):
        plan = ExperimentPlan(name="smoke", generator="table2",
                              output_dir=tmp_path, trials=3, seed=5,
                              photons=1000.0,
                              threshold_grid=(0.0, 1.0, 4.0))
        result = run(plan)
        assert result.json_path.exists()
        assert result.csv_path.exists()
        assert result.manifest_path.exists()
        payload = json.loads(result.json_path.read_text())
        validate_payload(payload, "calibration_report")
        validate_payload(json.loads(result.manifest_path.read_text()),
                         "manifest")
        header = result.csv_path.read_text().splitlines()[0]
        assert header == ("scenario,pi1_prime,photons,threshold,n_trials,"
                          "n_wrong,error_rate")
        rows = result.csv_path.read_text().splitlines()[1:]
        assert len(rows) == 5 * 3  # scenarios x thresholds

    def test_manifest_regenerates_reports_bit_identically(self, tmp_path):
        first = tmp_path / "first"
        plan = ExperimentPlan(name="regen", generator="closer-lifetimes",
                              output_dir=first, trials=4, seed=9,
                              photons=1000.0, pi1_prime=0.5,
                              threshold_grid=(0.0, 2.0, 4.0))
        result = run(plan)
        second = tmp_path / "second"
        replay = run(plan_from_manifest(result.manifest_path,
                                        output_dir=second))
        assert (replay.json_path.read_bytes()
                == result.json_path.read_bytes())
        assert (replay.csv_path.read_bytes() == result.csv_path.read_bytes())

    def test_runs_share_no_state(self, tmp_path):
        plan_a = ExperimentPlan(name="a", generator="closer-lifetimes",
                                output_dir=tmp_path / "a1", trials=2, seed=1,
                                photons=1000.0, threshold_grid=(1.0,))
        plan_b = ExperimentPlan(name="b", generator="closer-lifetimes",
                                output_dir=tmp_path / "b", trials=2, seed=2,
                                photons=1000.0, threshold_grid=(1.0,))
        first = run(plan_a).json_path.read_bytes()
        run(plan_b)
        again = run(ExperimentPlan(name="a", generator="closer-lifetimes",
                                   output_dir=tmp_path / "a2", trials=2,
                                   seed=1, photons=1000.0,
                                   threshold_grid=(1.0,))).json_path.read_bytes()
        assert first == again

    def test_limits_plan_outputs(self, tmp_path):
        plan = ExperimentPlan(name="lim", generator="limits-case-b",
                              output_dir=tmp_path, mc_samples=20_000, seed=3)
        result = run(plan)
        payload = json.loads(result.json_path.read_text())
        validate_payload(payload, "limits_report")
        assert payload["method"] == "monte-carlo"
        assert payload["photon_count"] == 32
        header = result.csv_path.read_text().splitlines()[0]
        assert header == ("case,photon_count,samples_or_tolerance,method,"
                          "estimate,ci_halfwidth")

    def test_expectations_encoded(self, tmp_path):
        plan = ExperimentPlan(name="exp", generator="limits-case-b",
                              output_dir=tmp_path, mc_samples=50_000, seed=3)
        result = run(plan)
        assert len(result.expectations) == 1
        assert isinstance(result.ok, bool)

    def test_pulse_count_constant_recorded(self, tmp_path):
        plan = ExperimentPlan(name="pc", generator="limits-case-b",
                              output_dir=tmp_path, mc_samples=2_000, seed=0)
        manifest = json.loads(run(plan).manifest_path.read_text())
        assert manifest["pulse_count"] == EXPERIMENT_PULSE_COUNT
        assert manifest["package_version"]


class TestRunLimitsCaseA:
    def test_case_a_report_serializes(self, tmp_path):
        # regression: the CI-adjusted expectation must reach JSON as
        # plain floats/bools even though numpy produced the interval
        plan = ExperimentPlan(name="lima", generator="limits-case-a",
                              output_dir=tmp_path, mc_samples=20_000, seed=1)
        result = run(plan)
        payload = json.loads(result.json_path.read_text())
        validate_payload(payload, "limits_report")
        assert isinstance(payload["expectations"][0]["ok"], bool)

    def test_case_a_alternative_noise_reading(self, tmp_path):
        plan = ExperimentPlan(name="limat", generator="limits-case-a",
                              output_dir=tmp_path, mc_samples=20_000, seed=1,
                              noise_fraction=0.1)
        result = run(plan)
        models = json.loads(result.json_path.read_text())["models"]
        assert models["a"]["noise_per_pulse"] == pytest.approx(0.1)
