import pytest

from services.generators import two_node_demo
from services.model import BudgetConstraints, DirectedGraph, InfluenceInstance, TriggeringDistribution
from services.oracle import InfluenceOracle, modular_oracle


def point_mass_instance(n, edges, thresholds, budget, capacities):
    """Edge-categorical instance with a deterministic threshold per edge."""
    graph = DirectedGraph.from_edges(n, edges)
    supports = {edge: [(t, 1.0)] for edge, t in zip(edges, thresholds)}
    triggering = TriggeringDistribution.edge_categorical(graph, supports, budget)
    return InfluenceInstance(graph, triggering, BudgetConstraints.create(budget, capacities))


@pytest.fixture
def demo_instance():
    """Edge 0 -> 1 with threshold 1 or 2 (1/2 each), B=1; f((1, 0)) = 1.5."""
    return two_node_demo()


@pytest.fixture
def demo_oracle(demo_instance):
    return InfluenceOracle.exact(demo_instance)


@pytest.fixture
def path_instance():
    """Path 0 -> 1 -> 2 with every threshold 0."""
    return point_mass_instance(3, [(0, 1), (1, 2)], [0, 0], 2, [2, 2, 2])


@pytest.fixture
def modular_3_1():
    return modular_oracle([3.0, 1.0])


@pytest.fixture
def point_mass():
    return point_mass_instance
