import json

import numpy as np
import pytest

from csdpp.linalg import project_capped_simplex
from csdpp.verify import MUTANTS, SUITES, grid_projection_oracle, run_suite, run_suites

# trimmed trial counts: enough signal for the defect injectors, quick in CI
REDUCED = {
    "lemma1": dict(trials=20, draws=5),
    "lemma3": dict(random_trials=1500),
    "sherman": dict(d=8, k=5, t=80, projections=5),
    "projection": dict(instances=25),
    "bounds": dict(trials=1500),
    "regret": dict(t=800),
}


class TestSuitesPass:
    @pytest.mark.parametrize("name", ["lemma1", "lemma3", "sherman", "projection", "bounds"])
    def test_clean_suite_passes(self, name):
        report = run_suite(name, **REDUCED[name])
        assert report.passed, report.to_dict()
        assert all(c["passed"] for c in report.checks)

    def test_regret_suite_passes_at_default_horizon(self):
        report = run_suite("regret")
        assert report.passed, report.to_dict()
        names = [c["name"] for c in report.checks]
        assert names == ["split-agreement", "rate-decay", "budget"]

    def test_reports_are_json_serializable(self):
        report = run_suite("projection", instances=5)
        payload = json.loads(json.dumps(report.to_dict()))
        assert payload["suite"] == "projection"
        assert payload["passed"] is True


class TestMutantsFail:
    @pytest.mark.parametrize("name", sorted(MUTANTS))
    def test_injected_defect_is_caught(self, name):
        report = run_suite(name, mutant=MUTANTS[name], **REDUCED[name])
        assert not report.passed, f"suite {name} missed its canonical defect"

    def test_unknown_mutant_is_inert(self):
        report = run_suite("projection", instances=5, mutant="not-a-real-defect")
        assert report.passed


class TestRunner:
    def test_unknown_suite(self):
        with pytest.raises(ValueError, match="unknown suite"):
            run_suite("lemma99")

    def test_inapplicable_kwargs_are_filtered(self):
        report = run_suite("projection", instances=5, random_trials=7, d=3)
        assert report.passed
        assert report.params["instances"] == 5

    def test_none_kwargs_fall_back_to_defaults(self):
        report = run_suite("projection", instances=None)
        assert report.params["instances"] == 50

    def test_run_suites_ordering(self):
        reports = run_suites(["projection", "lemma1"], instances=5, trials=5, draws=2)
        assert [r.name for r in reports] == ["projection", "lemma1"]
        assert all(r.passed for r in reports)

    def test_registry_alignment(self):
        assert sorted(SUITES) == sorted(MUTANTS)


class TestGridOracle:
    def test_matches_exact_projection(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            v = rng.uniform(-1.0, 2.0, size=6)
            got = grid_projection_oracle(v, 3)
            exact = project_capped_simplex(v, 3)
            assert np.max(np.abs(got - exact)) <= 1e-5

    def test_hand_case(self):
        got = grid_projection_oracle(np.array([1.2, 0.9, 0.5]), 2)
        np.testing.assert_allclose(got, [1.0, 0.7, 0.3], atol=1e-5)
