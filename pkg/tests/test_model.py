import pytest

from services.errors import InstanceError, LengthMismatch
from services.model import (
    BudgetConstraints,
    DirectedGraph,
    InfluenceInstance,
    TriggeringDistribution,
    TriggeringKind,
    add_chi,
    add_units,
    encode_classical,
    lattice_join,
    lattice_le,
    lattice_meet,
    validate_allocation,
)


class TestLattice:
    def test_join_and_meet(self):
        assert lattice_join((1, 0), (0, 2)) == (1, 2)
        assert lattice_meet((1, 0), (0, 2)) == (0, 0)

    def test_join_is_idempotent(self):
        x = (3, 1, 4)
        assert lattice_join(x, x) == x
        assert lattice_meet(x, x) == x

    def test_order(self):
        assert lattice_le((0, 1), (1, 1))
        assert not lattice_le((2, 0), (1, 1))

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            lattice_join((1, 2), (1,))

    def test_add_chi_is_a_join(self):
        assert add_chi((0, 0), 1, 3) == (0, 3)
        assert add_chi((2, 0), 0, 1) == (2, 0)
        assert add_chi((1, 1), 0, 4) == (4, 1)

    def test_add_units_is_a_sum(self):
        assert add_units((2, 0), 0, 1) == (3, 0)

    def test_add_chi_rejects_bad_agent(self):
        with pytest.raises(IndexError):
            add_chi((0, 0), 2, 1)


class TestBudgetConstraints:
    def test_feasible(self):
        verdict = validate_allocation((1, 1), BudgetConstraints.create(2, [1, 2]))
        assert verdict.feasible
        assert verdict.describe() == "feasible"

    def test_capacity_violation(self):
        verdict = validate_allocation((2, 1), BudgetConstraints.create(4, [1, 2]))
        assert not verdict.feasible
        assert verdict.capacity_violations == ((0, 2, 1),)
        assert "capacity at i=0" in verdict.describe()

    def test_budget_violation(self):
        verdict = validate_allocation((1, 2), BudgetConstraints.create(2, [2, 2]))
        assert not verdict.feasible
        assert verdict.budget_excess == 1

    def test_length_mismatch_is_infeasible(self):
        assert validate_allocation((1,), BudgetConstraints.create(2, [1, 1])).length_mismatch

    def test_capacity_clamped_to_budget(self):
        assert BudgetConstraints.create(2, [5, 1]).capacities == (2, 1)

    def test_zero_capacity_needs_zero_budget(self):
        assert BudgetConstraints.create(0, [0, 0]).capacities == (0, 0)
        with pytest.raises(InstanceError):
            BudgetConstraints.create(2, [0, 1])

    def test_negative_budget(self):
        with pytest.raises(InstanceError):
            BudgetConstraints.create(-1, [1])

    def test_feasible_allocations_are_lexicographic(self):
        constraints = BudgetConstraints.create(2, [2, 1])
        assert list(constraints.feasible_allocations()) == [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0)]
        assert constraints.search_space_size == 6

    def test_restricted_to(self):
        assert BudgetConstraints.create(3, [2, 3, 1]).restricted_to([1]).capacities == (0, 3, 0)


class TestGraph:
    def test_edges_ordered_by_target(self):
        graph = DirectedGraph.from_edges(3, [(2, 0), (0, 1), (1, 0)])
        assert graph.edges == ((1, 0), (2, 0), (0, 1))
        assert graph.node_edge_slices[0] == slice(0, 2)
        assert graph.out_neighbors[0] == (1,)

    @pytest.mark.parametrize("edges", [[(0, 0)], [(0, 3)], [(0, 1), (0, 1)]])
    def test_rejects_malformed_edges(self, edges):
        with pytest.raises(InstanceError):
            DirectedGraph.from_edges(3, edges)


class TestTriggering:
    def test_thresholds_above_cap_are_clamped(self):
        graph = DirectedGraph.from_edges(2, [(0, 1)])
        triggering = TriggeringDistribution.edge_categorical(graph, {(0, 1): [(7, 1.0)]}, 2)
        assert triggering.edge_supports == (((3, 1.0),),)

    def test_probabilities_must_sum_to_one(self):
        graph = DirectedGraph.from_edges(2, [(0, 1)])
        with pytest.raises(InstanceError, match="sum"):
            TriggeringDistribution.edge_categorical(graph, {(0, 1): [(0, 0.5), (1, 0.4)]}, 2)

    def test_missing_edge_spec(self):
        graph = DirectedGraph.from_edges(2, [(0, 1)])
        with pytest.raises(InstanceError, match="missing"):
            TriggeringDistribution.edge_categorical(graph, {}, 2)

    def test_mixture_vector_length(self):
        graph = DirectedGraph.from_edges(3, [(0, 2), (1, 2)])
        with pytest.raises(InstanceError, match="in-degree"):
            TriggeringDistribution.node_mixture(graph, {2: [(1.0, (0,))]}, 2)

    def test_edge_support_product(self):
        graph = DirectedGraph.from_edges(3, [(0, 2), (1, 2)])
        triggering = TriggeringDistribution.edge_categorical(
            graph, {(0, 2): [(0, 0.5), (1, 0.5)], (1, 2): [(0, 0.2), (1, 0.3), (2, 0.5)]}, 2
        )
        assert triggering.support_size(graph) == 6
        assert len(triggering.node_support(graph, 2)) == 6

    def test_instance_rejects_budget_mismatch(self):
        graph = DirectedGraph.from_edges(2, [(0, 1)])
        triggering = TriggeringDistribution.edge_categorical(graph, {(0, 1): [(0, 1.0)]}, 1)
        with pytest.raises(InstanceError):
            InfluenceInstance(graph, triggering, BudgetConstraints.create(2, [1, 1]))


class TestEncodeClassical:
    def test_certain_member(self):
        graph = DirectedGraph.from_edges(2, [(0, 1)])
        encoded = encode_classical(graph, {1: [(1.0, [0])]}, 2)
        assert encoded.kind is TriggeringKind.NODE_MIXTURE
        assert encoded.node_supports[1] == ((1.0, (0,)),)

    def test_optional_member_gets_never_threshold(self):
        graph = DirectedGraph.from_edges(2, [(0, 1)])
        encoded = encode_classical(graph, {1: [(0.3, [0]), (0.7, [])]}, 1)
        assert dict((vec, p) for p, vec in encoded.node_supports[1]) == {(0,): 0.3, (2,): 0.7}

    def test_full_set(self):
        graph = DirectedGraph.from_edges(3, [(0, 2), (1, 2)])
        encoded = encode_classical(graph, {2: [(1.0, [0, 1])]}, 3)
        assert encoded.node_supports[2] == ((1.0, (0, 0)),)

    def test_rejects_non_neighbour(self):
        graph = DirectedGraph.from_edges(3, [(0, 2)])
        with pytest.raises(InstanceError, match="non-in-neighbours"):
            encode_classical(graph, {2: [(1.0, [1])]}, 1)
