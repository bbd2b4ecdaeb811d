import math

import numpy as np
import pytest

from services.errors import SearchSpaceTooLarge
from services.generators import suite_instance, two_node_demo
from services.model import BudgetConstraints, validate_allocation
from services.offline_solver import (
    SolverConfig,
    SolverMode,
    best_single,
    brute_force_opt,
    density_greedy,
    greedy_partial_enum,
    greedy_trace,
    seed_assignments,
    solve,
)
from services.oracle import FunctionOracle, InfluenceOracle, modular_oracle


def knapsack_trap():
    """Agent 0 pays 1.1 for its first unit; agent 1 pays 10 only at its full capacity of 10."""
    return FunctionOracle(2, lambda b: (1.1 if b[0] >= 1 else 0.0) + (10.0 if b[1] >= 10 else 0.0), "trap")


@pytest.fixture
def trap_constraints():
    return BudgetConstraints.create(10, [1, 10])


class TestBruteForce:
    def test_zero_budget(self, demo_oracle):
        constraints = BudgetConstraints.create(0, [0, 0])
        assert brute_force_opt(demo_oracle, constraints) == ((0, 0), 0.0)

    def test_demo_instance(self, demo_oracle, demo_instance):
        b, value = brute_force_opt(demo_oracle, demo_instance.constraints)
        assert b == (1, 0)
        assert value == pytest.approx(1.5)

    def test_modular(self, modular_3_1):
        b, value = brute_force_opt(modular_3_1, BudgetConstraints.create(2, [2, 2]))
        assert b == (2, 0)
        assert value == 6.0

    def test_search_limit(self, modular_3_1):
        with pytest.raises(SearchSpaceTooLarge):
            brute_force_opt(modular_3_1, BudgetConstraints.create(2, [2, 2]), limit=4)


class TestDensityGreedy:
    def test_zero_budget(self, demo_oracle):
        assert density_greedy(demo_oracle, BudgetConstraints.create(0, [0, 0])) == (0, 0)

    def test_demo_hand_trace(self):
        instance = two_node_demo(budget=2, capacities=(2, 1))
        oracle = InfluenceOracle.exact(instance)
        trace = greedy_trace(oracle, instance.constraints)
        assert trace.values[1] == pytest.approx(1.5)
        assert trace.value == pytest.approx(2.0)
        assert trace.allocation == (2, 0)

    def test_single_agent_spends_everything(self):
        oracle = modular_oracle([1.0])
        assert density_greedy(oracle, BudgetConstraints.create(3, [3])) == (3,)

    def test_values_never_decrease(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            instance = suite_instance(rng, max_nodes=5, max_budget=4)
            trace = greedy_trace(InfluenceOracle.exact(instance), instance.constraints)
            assert all(a <= b for a, b in zip(trace.values, trace.values[1:]))
            assert validate_allocation(trace.allocation, instance.constraints).feasible

    def test_skips_zero_gain(self):
        oracle = FunctionOracle(2, lambda b: float(b[0] > 0))
        assert density_greedy(oracle, BudgetConstraints.create(3, [3, 3])) == (1, 0)


class TestPartialEnumeration:
    def test_seed_assignments_start_empty(self):
        seeds = list(seed_assignments(BudgetConstraints.create(2, [2, 1]), 2))
        assert seeds[0] == ()
        assert ((0, 1), (1, 1)) in seeds
        assert ((0, 2), (1, 1)) not in seeds

    def test_depth_one_single_agent_is_optimal(self):
        oracle = FunctionOracle(1, lambda b: [0.0, 0.2, 5.0, 5.1][b[0]])
        constraints = BudgetConstraints.create(3, [3])
        assert oracle.value(greedy_partial_enum(oracle, constraints, 1)) == brute_force_opt(oracle, constraints)[1]

    def test_zero_budget(self, demo_oracle):
        assert greedy_partial_enum(demo_oracle, BudgetConstraints.create(0, [0, 0]), 3) == (0, 0)

    def test_ratio_on_suite_instances(self):
        rng = np.random.default_rng(12)
        for _ in range(5):
            instance = suite_instance(rng, max_nodes=4, max_budget=3)
            oracle = InfluenceOracle.exact(instance)
            _, opt = brute_force_opt(oracle, instance.constraints)
            value = oracle.value(greedy_partial_enum(oracle, instance.constraints, 3))
            assert value >= (1 - 1 / math.e) * opt - 1e-9

    def test_depth_is_monotone(self):
        instance = suite_instance(np.random.default_rng(5), max_nodes=5, max_budget=3)
        oracle = InfluenceOracle.exact(instance)
        values = [greedy_trace(oracle, instance.constraints).value]
        values += [oracle.value(greedy_partial_enum(oracle, instance.constraints, d)) for d in (1, 2, 3)]
        assert values == sorted(values)


class TestBestSingle:
    def test_one_agent(self):
        assert best_single(modular_oracle([2.0]), BudgetConstraints.create(2, [2])) == (2,)

    def test_argmax_with_low_index_ties(self):
        oracle = modular_oracle([2.0, 5.0, 5.0])
        assert best_single(oracle, BudgetConstraints.create(1, [1, 1, 1])) == (0, 1, 0)

    def test_all_equal_picks_first(self):
        assert best_single(modular_oracle([1.0, 1.0]), BudgetConstraints.create(1, [1, 1])) == (1, 0)


class TestSolve:
    def test_brute_force_mode(self, demo_oracle, demo_instance):
        result = solve(demo_oracle, demo_instance.constraints, SolverConfig(SolverMode.BRUTE_FORCE))
        assert result.value == pytest.approx(1.5)
        assert result.queries > 0
        assert result.report()["mode"] == "brute_force"

    def test_best_single_rescues_greedy(self, trap_constraints):
        oracle = knapsack_trap()
        greedy = density_greedy(oracle, trap_constraints)
        assert oracle.value(greedy) == pytest.approx(1.1)
        result = solve(oracle, trap_constraints, SolverConfig(SolverMode.GREEDY))
        assert result.best_single_used
        assert result.allocation == (0, 10)
        assert result.value == 10.0

    def test_partial_enum_mode(self):
        instance = suite_instance(np.random.default_rng(8), max_nodes=4, max_budget=3)
        oracle = InfluenceOracle.exact(instance)
        result = solve(oracle, instance.constraints)
        _, opt = brute_force_opt(oracle, instance.constraints)
        assert result.value >= (1 - 1 / math.e) * opt - 1e-9

    def test_enum_depth_validated(self):
        with pytest.raises(ValueError):
            SolverConfig(enum_depth=4)
