import numpy as np
import pytest

from services.cascade import (
    cascade_value,
    composed_value,
    enumerate_batch,
    enumerate_scenarios,
    exact_influence,
    first_stage,
    hoeffding_half_width,
    mc_influence,
    sample_batch,
    sample_scenario,
    second_stage,
    step_cascade,
)
from services.classical import expected_triggering_spread
from services.errors import LengthMismatch, SupportTooLarge
from services.generators import classical_instance, suite_instance, two_node_demo
from services.model import (
    BudgetConstraints,
    DirectedGraph,
    InfluenceInstance,
    TriggeringDistribution,
    encode_classical,
)


def only_scenario(instance):
    (_, scenario), = enumerate_scenarios(instance)
    return scenario


class TestScenarios:
    def test_two_point_support(self, demo_instance):
        scenarios = enumerate_scenarios(demo_instance)
        assert [p for p, _ in scenarios] == [0.5, 0.5]
        assert sorted(s.threshold(1, 0) for _, s in scenarios) == [1, 2]

    def test_independent_edges_multiply(self):
        graph = DirectedGraph.from_edges(3, [(0, 2), (1, 2)])
        triggering = TriggeringDistribution.edge_categorical(
            graph, {(0, 2): [(0, 0.5), (1, 0.5)], (1, 2): [(0, 0.2), (1, 0.3), (2, 0.5)]}, 2
        )
        instance = InfluenceInstance(graph, triggering, BudgetConstraints.create(2, [2, 2, 2]))
        batch = enumerate_batch(instance)
        assert len(batch) == 6
        assert batch.weights.sum() == pytest.approx(1.0)

    def test_deterministic_distribution(self, path_instance):
        assert len(enumerate_scenarios(path_instance)) == 1

    def test_enumeration_limit(self, demo_instance):
        with pytest.raises(SupportTooLarge):
            enumerate_batch(demo_instance, limit=1)

    def test_classical_certain_sets_give_zero_thresholds(self):
        graph = DirectedGraph.from_edges(3, [(0, 1), (1, 2)])
        triggering = encode_classical(graph, {1: [(1.0, [0])], 2: [(1.0, [1])]}, 2)
        instance = InfluenceInstance(graph, triggering, BudgetConstraints.create(2, [1, 1, 1]))
        assert only_scenario(instance).thresholds == ((), (0,), (0,))

    def test_point_mass_threshold(self, point_mass):
        instance = point_mass(2, [(0, 1)], [2], 2, [2, 2])
        assert sample_scenario(instance, seed=3).threshold(1, 0) == 2

    def test_sampling_is_seeded(self):
        instance = suite_instance(np.random.default_rng(4))
        assert sample_scenario(instance, 11).thresholds == sample_scenario(instance, 11).thresholds


class TestStages:
    def test_first_stage_empty(self, demo_instance):
        scenario = enumerate_scenarios(demo_instance)[1][1]
        assert first_stage(scenario, (0, 0)) == frozenset()

    def test_first_stage_budget_gate(self, point_mass):
        scenario = only_scenario(point_mass(2, [(0, 1)], [2], 2, [2, 2]))
        assert first_stage(scenario, (2, 0)) == {0, 1}
        assert first_stage(scenario, (1, 0)) == {0}

    def test_second_stage_word_of_mouth(self, path_instance):
        scenario = only_scenario(path_instance)
        assert second_stage(scenario, frozenset()) == frozenset()
        assert second_stage(scenario, {0}) == {0, 1, 2}

    def test_second_stage_stops_at_positive_threshold(self, point_mass):
        scenario = only_scenario(point_mass(3, [(0, 1), (1, 2)], [0, 1], 2, [2, 2, 2]))
        assert second_stage(scenario, {0}) == {0, 1}

    def test_gated_hop_does_not_continue_without_budget(self, point_mass):
        # 1 is reached through a budget gate, but has no budget to open 1 -> 2
        scenario = only_scenario(point_mass(3, [(0, 1), (1, 2)], [1, 1], 2, [2, 2, 2]))
        assert step_cascade(scenario, (1, 0, 0)) == {0, 1}
        assert composed_value(scenario, (1, 0, 0)) == 2


class TestCascadeValue:
    def test_zero_allocation(self, path_instance):
        assert cascade_value(only_scenario(path_instance), (0, 0, 0)) == 0

    @pytest.mark.parametrize("threshold, expected", [(1, 2), (2, 1)])
    def test_two_node_hand_trace(self, point_mass, threshold, expected):
        scenario = only_scenario(point_mass(2, [(0, 1)], [threshold], 2, [2, 2]))
        assert cascade_value(scenario, (1, 0)) == expected

    def test_length_checked(self, path_instance):
        with pytest.raises(LengthMismatch):
            cascade_value(only_scenario(path_instance), (1, 0))

    def test_step_equals_composition_on_random_pairs(self):
        rng = np.random.default_rng(0)
        for index in range(20):
            instance = suite_instance(rng, max_nodes=8)
            scenario = sample_scenario(instance, index)
            for _ in range(10):
                b = tuple(int(x) for x in rng.integers(0, instance.budget + 1, size=instance.n))
                assert cascade_value(scenario, b) == composed_value(scenario, b)

    def test_batch_matches_scalar_cascade(self):
        instance = suite_instance(np.random.default_rng(9), max_nodes=6)
        batch = sample_batch(instance, 40, seed=1)
        b = (1,) * instance.n
        counts = batch.cascade_counts(b)
        assert list(counts) == [cascade_value(s, b) for s in batch.scenarios()]


class TestInfluence:
    def test_zero(self, demo_instance):
        assert exact_influence(demo_instance, (0, 0)) == 0.0

    def test_demo_value(self, demo_instance):
        assert exact_influence(demo_instance, (1, 0)) == pytest.approx(1.5)

    def test_full_activation_on_strongly_connected_graph(self, point_mass):
        instance = point_mass(3, [(0, 1), (1, 2), (2, 0)], [0, 0, 0], 1, [1, 1, 1])
        assert exact_influence(instance, (0, 1, 0)) == 3.0

    def test_mc_zero_allocation(self, demo_instance):
        value, half_width = mc_influence(demo_instance, (0, 0), 50, seed=2)
        assert value == 0.0
        assert half_width == pytest.approx(hoeffding_half_width(2, 50))

    def test_mc_on_deterministic_instance_is_exact(self, path_instance):
        value, _ = mc_influence(path_instance, (1, 0, 0), 30, seed=5)
        assert value == exact_influence(path_instance, (1, 0, 0))

    def test_mc_converges_on_demo(self, demo_instance):
        value, _ = mc_influence(demo_instance, (1, 0), 100_000, seed=7)
        assert abs(value - 1.5) <= 0.02

    def test_mc_is_seeded(self):
        instance = two_node_demo()
        assert mc_influence(instance, (1, 0), 500, 3) == mc_influence(instance, (1, 0), 500, 3)

    def test_hoeffding_width(self):
        assert hoeffding_half_width(10, 1000) == pytest.approx(10 * np.sqrt(np.log(40) / 2000))


class TestClassicalReduction:
    def test_matches_set_based_simulator(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            instance, subsets = classical_instance(rng)
            for b in [(0,) * instance.n, (1,) * instance.n, (1,) + (0,) * (instance.n - 1)]:
                seeds = [v for v, x in enumerate(b) if x > 0]
                assert exact_influence(instance, b) == pytest.approx(
                    expected_triggering_spread(instance.graph, subsets, seeds), abs=1e-9
                )
