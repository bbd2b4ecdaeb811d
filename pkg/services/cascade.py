"""Deterministic Budgeted Triggering cascades under a fixed scenario.

Two cascade implementations live here and must agree:

* ``step_cascade`` follows the round-by-round process: budgeted nodes are
  active at step 0, and at each later step a node becomes active if an
  in-neighbour ``u`` activated in the previous step has ``b_u >= t^v_u``.
* ``second_stage(first_stage(b))`` is the two-stage decomposition
  ``h_σ ∘ g_σ``.

``ScenarioBatch`` runs the step process over many scenarios at once with
numpy and backs the influence oracles.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from config.settings import ENUMERATION_LIMIT, HOEFFDING_DELTA
from services.errors import LengthMismatch, SupportTooLarge
from services.model import DirectedGraph, InfluenceInstance, TriggeringKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    """One realisation σ of every triggering vector."""

    graph: DirectedGraph = field(repr=False, compare=False)
    thresholds: tuple[tuple[int, ...], ...]
    probability: Optional[float] = None

    @cached_property
    def gated_out(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per node ``u``: ``(v, t^v_u)`` for every out-neighbour ``v``."""
        out: list[list[tuple[int, int]]] = [[] for _ in range(self.graph.n)]
        for v, sources in enumerate(self.graph.in_neighbors):
            for u, t in zip(sources, self.thresholds[v]):
                out[u].append((v, t))
        return tuple(tuple(row) for row in out)

    @cached_property
    def word_of_mouth(self) -> tuple[tuple[int, ...], ...]:
        """Per node ``u``: out-neighbours ``v`` with ``t^v_u = 0``."""
        return tuple(tuple(v for v, t in row if t == 0) for row in self.gated_out)

    def threshold(self, v: int, u: int) -> int:
        return self.thresholds[v][self.graph.in_neighbors[v].index(u)]


def _check_allocation(graph: DirectedGraph, b: Sequence[int]) -> None:
    if len(b) != graph.n:
        raise LengthMismatch(f"allocation of length {len(b)} for {graph.n} nodes")


def first_stage(scenario: Scenario, b: Sequence[int]) -> frozenset[int]:
    """g_σ(b): budgeted nodes plus the first-hop neighbours their budget reaches."""
    _check_allocation(scenario.graph, b)
    reached = {v for v, x in enumerate(b) if x > 0}
    for v in list(reached):
        for u, t in scenario.gated_out[v]:
            if b[v] >= t:
                reached.add(u)
    return frozenset(reached)


def second_stage(scenario: Scenario, seeds: frozenset[int] | set[int]) -> frozenset[int]:
    """h_σ(S): word-of-mouth closure of ``seeds`` through zero-threshold edges."""
    influenced = set(seeds)
    queue = deque(influenced)
    while queue:
        u = queue.popleft()
        for v in scenario.word_of_mouth[u]:
            if v not in influenced:
                influenced.add(v)
                queue.append(v)
    return frozenset(influenced)


def step_cascade(scenario: Scenario, b: Sequence[int]) -> frozenset[int]:
    """Influenced set of the round-by-round process."""
    graph = scenario.graph
    _check_allocation(graph, b)
    active = {v for v, x in enumerate(b) if x > 0}
    frontier = sorted(active)
    rounds = 0
    while frontier:
        rounds += 1
        assert rounds <= graph.n, "cascade did not terminate within n rounds"
        newly = []
        for u in frontier:
            for v, t in scenario.gated_out[u]:
                if v not in active and b[u] >= t:
                    active.add(v)
                    newly.append(v)
        frontier = newly
    return frozenset(active)


def cascade_value(scenario: Scenario, b: Sequence[int]) -> int:
    """f_σ(b), from the step process."""
    return len(step_cascade(scenario, b))


def composed_value(scenario: Scenario, b: Sequence[int]) -> int:
    """|h_σ(g_σ(b))|, the two-stage reading of f_σ(b)."""
    return len(second_stage(scenario, first_stage(scenario, b)))


@dataclass(frozen=True, eq=False)
class ScenarioBatch:
    """A weighted set of scenarios stored as an ``(S, E)`` threshold matrix.

    Columns follow ``graph.edges``. ``weights`` sum to 1.
    """

    graph: DirectedGraph
    thresholds: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return int(self.thresholds.shape[0])

    @cached_property
    def _sources(self) -> np.ndarray:
        return np.array([u for u, _ in self.graph.edges], dtype=np.int64)

    @cached_property
    def _incidence(self) -> np.ndarray:
        incidence = np.zeros((len(self.graph.edges), self.graph.n), dtype=np.int32)
        for e, (_, v) in enumerate(self.graph.edges):
            incidence[e, v] = 1
        return incidence

    def scenario(self, s: int) -> Scenario:
        row = self.thresholds[s]
        per_node = tuple(
            tuple(int(t) for t in row[self.graph.node_edge_slices[v]]) for v in range(self.graph.n)
        )
        return Scenario(self.graph, per_node, float(self.weights[s]))

    def scenarios(self) -> list[Scenario]:
        return [self.scenario(s) for s in range(len(self))]

    def cascade_counts(self, b: Sequence[int]) -> np.ndarray:
        """Number of influenced nodes in every scenario, step semantics."""
        _check_allocation(self.graph, b)
        n = self.graph.n
        budget = np.asarray(b, dtype=np.int64)
        active = np.zeros((len(self), n), dtype=bool)
        active[:, budget > 0] = True
        if not self.graph.edges:
            return active.sum(axis=1)
        live = self.thresholds <= budget[self._sources]
        frontier = active
        rounds = 0
        while frontier.any():
            rounds += 1
            assert rounds <= n, "cascade did not terminate within n rounds"
            hits = frontier[:, self._sources] & live
            reached = (hits.astype(np.int32) @ self._incidence) > 0
            frontier = reached & ~active
            active = active | frontier
        return active.sum(axis=1)

    def expected_value(self, b: Sequence[int]) -> float:
        return float(self.weights @ self.cascade_counts(b))


def _support_tables(instance: InfluenceInstance):
    graph, triggering = instance.graph, instance.triggering
    tables = []
    for v in range(graph.n):
        support = triggering.node_support(graph, v)
        degree = len(graph.in_neighbors[v])
        vectors = np.array([vec for _, vec in support], dtype=np.int32).reshape(len(support), degree)
        probs = np.array([p for p, _ in support], dtype=np.float64)
        tables.append((vectors, probs))
    return tables


def enumerate_batch(instance: InfluenceInstance, limit: Optional[int] = None) -> ScenarioBatch:
    limit = ENUMERATION_LIMIT if limit is None else limit
    graph = instance.graph
    size = instance.triggering.support_size(graph)
    if size > limit:
        raise SupportTooLarge(size, limit)
    tables = _support_tables(instance)
    shape = [len(probs) for _, probs in tables]
    index = np.unravel_index(np.arange(size), shape)
    thresholds = np.zeros((size, len(graph.edges)), dtype=np.int32)
    weights = np.ones(size, dtype=np.float64)
    for v, (vectors, probs) in enumerate(tables):
        thresholds[:, graph.node_edge_slices[v]] = vectors[index[v]]
        weights *= probs[index[v]]
    assert abs(math.fsum(weights) - 1.0) <= 1e-9, "scenario probabilities do not sum to 1"
    logger.debug("Enumerated %d scenarios", size)
    return ScenarioBatch(graph, thresholds, weights)


def enumerate_scenarios(instance: InfluenceInstance, limit: Optional[int] = None) -> list[tuple[float, Scenario]]:
    batch = enumerate_batch(instance, limit)
    return [(float(batch.weights[s]), batch.scenario(s)) for s in range(len(batch))]


def _draw_thresholds(instance: InfluenceInstance, m: int, seed) -> np.ndarray:
    graph, triggering = instance.graph, instance.triggering
    rng = np.random.default_rng(seed)
    thresholds = np.zeros((m, len(graph.edges)), dtype=np.int32)
    if triggering.kind is TriggeringKind.EDGE_CATEGORICAL:
        for e, support in enumerate(triggering.edge_supports):
            values = np.array([t for t, _ in support], dtype=np.int32)
            probs = np.array([p for _, p in support], dtype=np.float64)
            thresholds[:, e] = values[rng.choice(len(values), size=m, p=probs)]
        return thresholds
    for v, (vectors, probs) in enumerate(_support_tables(instance)):
        if vectors.shape[1] == 0:
            continue
        thresholds[:, graph.node_edge_slices[v]] = vectors[rng.choice(len(probs), size=m, p=probs)]
    return thresholds


def sample_batch(instance: InfluenceInstance, m: int, seed) -> ScenarioBatch:
    """``m`` independent scenarios; duplicates merged into multiplicity weights."""
    if m < 1:
        raise ValueError("m must be at least 1")
    graph = instance.graph
    drawn = _draw_thresholds(instance, m, seed)
    if drawn.shape[1] == 0:
        return ScenarioBatch(graph, drawn[:1], np.ones(1))
    rows, counts = np.unique(drawn, axis=0, return_counts=True)
    logger.debug("Sampled %d scenarios (%d distinct)", m, len(rows))
    return ScenarioBatch(graph, rows.astype(np.int32), counts / m)


def sample_scenario(instance: InfluenceInstance, seed) -> Scenario:
    drawn = _draw_thresholds(instance, 1, seed)
    return ScenarioBatch(instance.graph, drawn, np.ones(1)).scenario(0)


def hoeffding_half_width(n: int, m: int, delta: float = HOEFFDING_DELTA) -> float:
    """Half-width of the two-sided Hoeffding interval for values in [0, n]."""
    return n * math.sqrt(math.log(2.0 / delta) / (2.0 * m))


def exact_influence(instance: InfluenceInstance, b: Sequence[int], limit: Optional[int] = None) -> float:
    """f(b) = Σ_σ Pr(σ) f_σ(b) by full scenario enumeration."""
    return enumerate_batch(instance, limit).expected_value(b)


def mc_influence(instance: InfluenceInstance, b: Sequence[int], m: int, seed) -> tuple[float, float]:
    """Monte Carlo estimate of f(b) with its 95% Hoeffding half-width."""
    return sample_batch(instance, m, seed).expected_value(b), hoeffding_half_width(instance.n, m)
