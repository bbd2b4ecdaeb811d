import pytest

from services.oracle import InfluenceOracle
from services.verification import (
    SUITES,
    cascade_suite,
    dr_counterexample_instance,
    find_dr_counterexample,
    game_suite,
    lattice_suite,
    negated_marginal_oracle,
    online_suite,
    run_suites,
    secretary_success_rate,
    solver_suite,
)


def failing(suite):
    return {name: p.to_dict() for name, p in suite.properties.items() if not p.passed}


class TestBatteries:
    def test_lattice(self):
        suite = lattice_suite(seed=0, instances=3, pairs=20, mc_instances=1, mc_samples=50)
        assert suite.passed, failing(suite)
        assert suite.properties["submodular_exact"].checks == 60
        assert "monotone_monte_carlo" in suite.properties

    def test_mutant_is_caught(self):
        suite = lattice_suite(seed=0, instances=3, pairs=20, mutate=True)
        assert not suite.passed
        assert suite.properties["monotone_mutant"].counterexamples

    def test_cascade(self):
        suite = cascade_suite(seed=0, pairs=200, classical_instances=3)
        assert suite.passed, failing(suite)

    def test_solver(self):
        suite = solver_suite(seed=0, instances=3)
        assert suite.passed, failing(suite)

    def test_online(self):
        suite = online_suite(seed=0, instances=1, trials=100, variance_draws=2000, secretary_n=10,
                             secretary_trials=2000)
        assert suite.passed, failing(suite)

    def test_game(self):
        suite = game_suite(seed=0, instances=2, profiles=5, starts=2, externality_checks=5)
        assert suite.passed, failing(suite)
        assert suite.properties["star_poa"].passed

    def test_run_suites_expands_all(self):
        overrides = {
            "lattice": {"instances": 1, "pairs": 5, "mc_instances": 0},
            "cascade": {"pairs": 20, "classical_instances": 1},
            "solver": {"instances": 1},
            "online": {"instances": 1, "trials": 20, "variance_draws": 200, "secretary_n": 10,
                       "secretary_trials": 2000},
            "game": {"instances": 1, "profiles": 3, "starts": 2, "externality_checks": 2},
        }
        results = run_suites(["all"], seed=1, overrides=overrides)
        assert [r.suite for r in results] == list(SUITES)
        assert all(r.wall_time >= 0 for r in results)


class TestCounterexamples:
    def test_frozen_instance(self):
        oracle = InfluenceOracle.exact(dr_counterexample_instance())
        assert [oracle.value((k, 0, 0)) for k in range(3)] == [0.0, 1.0, 3.0]

    def test_search_finds_violation(self):
        found = find_dr_counterexample(seed=0)
        assert found is not None
        low, mid, high = found.values
        assert mid - low < high - mid

    def test_negated_marginals(self, demo_oracle):
        mutant = negated_marginal_oracle(demo_oracle)
        assert mutant.value((0, 0)) == 0.0
        assert mutant.value((1, 0)) == pytest.approx(-1.5)


class TestSecretaryRate:
    def test_small_population(self):
        assert secretary_success_rate(10, 2000, seed=0) >= 0.35


@pytest.mark.slow
class TestAcceptanceScale:
    def test_lattice(self):
        assert lattice_suite(seed=0).passed

    def test_cascade(self):
        assert cascade_suite(seed=0).passed

    def test_solver(self):
        assert solver_suite(seed=0).passed

    def test_online(self):
        assert online_suite(seed=0).passed

    def test_game(self):
        assert game_suite(seed=0).passed

    def test_secretary(self):
        assert secretary_success_rate(100, 10_000, seed=0) >= 0.35
