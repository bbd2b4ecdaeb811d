"""Instance and game generators."""
import itertools
import logging
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import networkx as nx
import numpy as np

from services.errors import InstanceError
from services.game import DelaySpec, GameInstance
from services.model import (
    BudgetConstraints,
    DirectedGraph,
    InfluenceInstance,
    TriggeringDistribution,
    encode_classical,
)
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)

ThresholdSupport = Sequence[tuple[int, float]]

MAX_IMPORT_IN_DEGREE = 12


def _random_support(rng: np.random.Generator, cap: int, max_points: int) -> list[tuple[int, float]]:
    """Up to ``max_points`` distinct thresholds in 0..cap with positive probabilities."""
    points = int(rng.integers(1, min(max_points, cap + 1) + 1))
    values = sorted(int(v) for v in rng.choice(cap + 1, size=points, replace=False))
    weights = rng.integers(1, 4, size=points)
    return [(value, float(w / weights.sum())) for value, w in zip(values, weights)]


def _digraph(n: int, p: float, seed: int) -> DirectedGraph:
    graph = nx.gnp_random_graph(n, p, seed=seed, directed=True)
    return DirectedGraph.from_edges(n, graph.edges())


def gnp_instance(n: int, p: float, budget: int, seed: int, support: Optional[ThresholdSupport] = None,
                 capacity: Optional[int] = None, max_support: int = 2) -> InfluenceInstance:
    """Directed G(n, p) with edge-categorical thresholds.

    Every edge uses ``support`` when given, otherwise a random support of at
    most ``max_support`` points in 0..B+1.
    """
    if n < 1:
        raise InstanceError("n must be at least 1")
    if not 0 <= p <= 1:
        raise InstanceError(f"edge probability must lie in [0, 1], got {p}")
    if budget < 1:
        raise InstanceError("generated instances need a positive budget")
    graph = _digraph(n, p, derive_seed(seed, "graph"))
    rng = np.random.default_rng(derive_seed(seed, "thresholds"))
    supports = {
        edge: list(support) if support is not None else _random_support(rng, budget + 1, max_support)
        for edge in graph.edges
    }
    triggering = TriggeringDistribution.edge_categorical(graph, supports, budget)
    capacities = [capacity if capacity is not None else budget] * n
    return InfluenceInstance(graph, triggering, BudgetConstraints.create(budget, capacities))


def two_node_demo(budget: int = 1, capacities: Sequence[int] = (1, 1)) -> InfluenceInstance:
    """Edge 0 -> 1 whose threshold is 1 or 2 with probability 1/2 each; f((1, 0)) = 1.5."""
    graph = DirectedGraph.from_edges(2, [(0, 1)])
    triggering = TriggeringDistribution.edge_categorical(graph, {(0, 1): [(1, 0.5), (2, 0.5)]}, budget)
    return InfluenceInstance(graph, triggering, BudgetConstraints.create(budget, capacities))


def suite_instance(rng: np.random.Generator, max_nodes: int = 6, max_budget: int = 3,
                   max_support: int = 3, edge_probability: Optional[float] = None) -> InfluenceInstance:
    """Random node-mixture instance for property batteries."""
    n = int(rng.integers(2, max_nodes + 1))
    budget = int(rng.integers(1, max_budget + 1))
    p = edge_probability if edge_probability is not None else float(rng.uniform(0.2, 0.7))
    graph = _digraph(n, p, int(rng.integers(2**31)))
    cap = budget + 1
    mixtures = {}
    for v in range(n):
        degree = len(graph.in_neighbors[v])
        if not degree:
            continue
        points = int(rng.integers(1, max_support + 1))
        weights = rng.integers(1, 4, size=points)
        mixtures[v] = [
            (float(w / weights.sum()), tuple(int(t) for t in rng.integers(0, cap + 1, size=degree)))
            for w in weights
        ]
    triggering = TriggeringDistribution.node_mixture(graph, mixtures, budget)
    capacities = [int(c) for c in rng.integers(1, budget + 1, size=n)]
    return InfluenceInstance(graph, triggering, BudgetConstraints.create(budget, capacities))


def random_subsets(rng: np.random.Generator, graph: DirectedGraph, max_subsets: int = 3) -> dict:
    """Per node, a distribution over at most ``max_subsets`` subsets of N(v)."""
    subsets = {}
    for v in range(graph.n):
        sources = graph.in_neighbors[v]
        if not sources:
            continue
        count = int(rng.integers(1, max_subsets + 1))
        weights = rng.integers(1, 4, size=count)
        subsets[v] = [
            (float(w / weights.sum()), [u for u in sources if rng.random() < 0.5]) for w in weights
        ]
    return subsets


def classical_instance(rng: np.random.Generator, max_nodes: int = 6, budget: int = 2):
    """Random classical Triggering instance with unit capacities; returns (instance, subsets)."""
    n = int(rng.integers(2, max_nodes + 1))
    graph = _digraph(n, float(rng.uniform(0.2, 0.6)), int(rng.integers(2**31)))
    subsets = random_subsets(rng, graph)
    triggering = encode_classical(graph, subsets, budget)
    return InfluenceInstance(graph, triggering, BudgetConstraints.create(budget, [1] * n)), subsets


def independent_cascade_subsets(graph: DirectedGraph, probabilities: dict) -> dict:
    """Triggering-set distributions of the Independent Cascade model.

    Each in-neighbour u joins T^v independently with probability p(u, v);
    zero-probability subsets are dropped.
    """
    subsets = {}
    for v in range(graph.n):
        sources = graph.in_neighbors[v]
        if not sources:
            continue
        if len(sources) > MAX_IMPORT_IN_DEGREE:
            raise InstanceError(f"node {v} has in-degree {len(sources)} > {MAX_IMPORT_IN_DEGREE}")
        entries = []
        for included in itertools.product((False, True), repeat=len(sources)):
            prob = math.prod(
                probabilities[(u, v)] if keep else 1.0 - probabilities[(u, v)]
                for u, keep in zip(sources, included)
            )
            if prob > 0:
                entries.append((prob, [u for u, keep in zip(sources, included) if keep]))
        subsets[v] = entries
    return subsets


def classical_import(lines: Iterable[str], budget: int, capacity: int = 1) -> InfluenceInstance:
    """Read an ``u v p`` edge list (Independent Cascade) as a budgeted instance.

    Node tokens become names in order of first appearance; ``#`` starts a comment.
    """
    names: list[str] = []
    index: dict[str, int] = {}
    edges: dict[tuple[int, int], float] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise InstanceError(f"line {number}: expected 'u v p', got {raw.strip()!r}")
        try:
            p = float(parts[2])
        except ValueError as exc:
            raise InstanceError(f"line {number}: bad probability {parts[2]!r}") from exc
        if not 0 <= p <= 1:
            raise InstanceError(f"line {number}: probability {p} outside [0, 1]")
        ends = []
        for token in parts[:2]:
            if token not in index:
                index[token] = len(names)
                names.append(token)
            ends.append(index[token])
        edge = (ends[0], ends[1])
        if edge in edges:
            raise InstanceError(f"line {number}: duplicate edge {parts[0]} -> {parts[1]}")
        edges[edge] = p
    if not names:
        raise InstanceError("edge list is empty")
    graph = DirectedGraph.from_edges(len(names), edges)
    triggering = encode_classical(graph, independent_cascade_subsets(graph, edges), budget)
    constraints = BudgetConstraints.create(budget, [capacity] * len(names))
    logger.info("Imported %d nodes and %d edges", len(names), len(edges))
    return InfluenceInstance(graph, triggering, constraints, tuple(names))


def classical_import_file(path: Union[str, Path], budget: int, capacity: int = 1) -> InfluenceInstance:
    with open(path) as handle:
        return classical_import(handle, budget, capacity)


def random_game(rng: np.random.Generator, max_nodes: int = 5, max_players: int = 3, max_budget: int = 2,
                delay: Optional[DelaySpec] = None) -> GameInstance:
    """Small random game with edge-categorical thresholds of at most two support points."""
    n = int(rng.integers(2, max_nodes + 1))
    budget = int(rng.integers(1, max_budget + 1))
    graph = _digraph(n, float(rng.uniform(0.15, 0.35)), int(rng.integers(2**31)))
    supports = {edge: _random_support(rng, budget + 1, 2) for edge in graph.edges}
    triggering = TriggeringDistribution.edge_categorical(graph, supports, budget)
    base = InfluenceInstance(graph, triggering, BudgetConstraints.create(budget, [budget] * n))
    players = []
    for _ in range(int(rng.integers(1, max_players + 1))):
        player_budget = int(rng.integers(1, budget + 1))
        capacities = [int(c) for c in rng.integers(1, player_budget + 1, size=n)]
        players.append(BudgetConstraints.create(player_budget, capacities))
    return GameInstance(base, tuple(players), delay or DelaySpec())


