"""Graph, triggering-distribution, budget and lattice primitives.

Nodes are dense indices ``0..n-1``. Allocations are plain integer tuples so they
hash cheaply and can key oracle caches.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from config.settings import PROBABILITY_TOLERANCE
from services.errors import InstanceError, LengthMismatch

logger = logging.getLogger(__name__)

BudgetAllocation = tuple[int, ...]
Support = tuple[tuple[float, tuple[int, ...]], ...]


class TriggeringKind(str, Enum):
    EDGE_CATEGORICAL = "edge_categorical"
    NODE_MIXTURE = "node_mixture"
    CLASSICAL = "classical"


@dataclass(frozen=True)
class DirectedGraph:
    """Directed graph with sorted in-neighbour lists; ``in_neighbors[v]`` is N(v)."""

    n: int
    in_neighbors: tuple[tuple[int, ...], ...]
    out_neighbors: tuple[tuple[int, ...], ...]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "DirectedGraph":
        if n < 1:
            raise InstanceError(f"graph needs at least one node, got n={n}")
        incoming: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise InstanceError(f"edge ({u}, {v}) references a node outside 0..{n - 1}")
            if u == v:
                raise InstanceError(f"self-loop at node {u}")
            if u in incoming[v]:
                raise InstanceError(f"parallel edge {u}->{v}")
            incoming[v].add(u)
        in_neighbors = tuple(tuple(sorted(s)) for s in incoming)
        outgoing: list[list[int]] = [[] for _ in range(n)]
        for v, sources in enumerate(in_neighbors):
            for u in sources:
                outgoing[u].append(v)
        return cls(n, in_neighbors, tuple(tuple(out) for out in outgoing))

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """All edges ``(u, v)`` ordered by target, then source."""
        return tuple((u, v) for v in range(self.n) for u in self.in_neighbors[v])

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {edge: e for e, edge in enumerate(self.edges)}

    @cached_property
    def node_edge_slices(self) -> tuple[slice, ...]:
        """Slice of ``edges`` holding the in-edges of each node."""
        slices, start = [], 0
        for v in range(self.n):
            stop = start + len(self.in_neighbors[v])
            slices.append(slice(start, stop))
            start = stop
        return tuple(slices)

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.edge_index


def _check_probabilities(probabilities: Sequence[float], where: str) -> None:
    if not probabilities:
        raise InstanceError(f"{where}: empty distribution")
    if any(p <= 0.0 for p in probabilities):
        raise InstanceError(f"{where}: probabilities must be positive")
    total = math.fsum(probabilities)
    if abs(total - 1.0) > PROBABILITY_TOLERANCE:
        raise InstanceError(f"{where}: probabilities sum to {total!r}, not 1")


def _clamp_threshold(value: int, cap: int, where: str) -> tuple[int, bool]:
    if int(value) != value or value < 0:
        raise InstanceError(f"{where}: threshold {value!r} is not a non-negative integer")
    if value > cap:
        return cap, True
    return int(value), False


def _merge(entries: Iterable[tuple[float, tuple[int, ...]]]) -> Support:
    merged: dict[tuple[int, ...], float] = {}
    for prob, vector in entries:
        merged[vector] = merged.get(vector, 0.0) + prob
    return tuple((prob, vector) for vector, prob in merged.items())


@dataclass(frozen=True)
class TriggeringDistribution:
    """Distribution of the triggering vectors t^v, one of three encodings.

    ``edge_supports`` is aligned with ``DirectedGraph.edges`` and holds
    ``(threshold, prob)`` pairs; ``node_supports`` holds per node
    ``(prob, vector over N(v))`` pairs; ``subset_supports`` holds per node
    ``(prob, triggering set)`` pairs. Only the field of ``kind`` is populated.
    Thresholds never exceed ``threshold_cap`` (= B+1, "never via budget").
    """

    kind: TriggeringKind
    threshold_cap: int
    edge_supports: tuple[tuple[tuple[int, float], ...], ...] = ()
    node_supports: tuple[Support, ...] = ()
    subset_supports: tuple[tuple[tuple[float, frozenset[int]], ...], ...] = ()

    @classmethod
    def edge_categorical(
        cls,
        graph: DirectedGraph,
        supports: Mapping[tuple[int, int], Iterable[tuple[int, float]]],
        budget: int,
    ) -> "TriggeringDistribution":
        cap = budget + 1
        for edge in supports:
            if not graph.has_edge(*edge):
                raise InstanceError(f"threshold spec for {edge[0]}->{edge[1]}, which is not an edge")
        clamped = 0
        per_edge = []
        for u, v in graph.edges:
            where = f"edge {u}->{v}"
            if (u, v) not in supports:
                raise InstanceError(f"{where}: missing threshold spec")
            entries = list(supports[(u, v)])
            _check_probabilities([p for _, p in entries], where)
            merged: dict[int, float] = {}
            for value, prob in entries:
                threshold, was_clamped = _clamp_threshold(value, cap, where)
                clamped += was_clamped
                merged[threshold] = merged.get(threshold, 0.0) + prob
            per_edge.append(tuple(sorted(merged.items())))
        if clamped:
            logger.warning("Clamped %d threshold value(s) above B+1=%d", clamped, cap)
        return cls(TriggeringKind.EDGE_CATEGORICAL, cap, edge_supports=tuple(per_edge))

    @classmethod
    def node_mixture(
        cls,
        graph: DirectedGraph,
        mixtures: Mapping[int, Iterable[tuple[float, Sequence[int]]]],
        budget: int,
    ) -> "TriggeringDistribution":
        cap = budget + 1
        clamped = 0
        per_node = []
        for v in range(graph.n):
            where = f"node {v}"
            degree = len(graph.in_neighbors[v])
            if v not in mixtures:
                if degree:
                    raise InstanceError(f"{where}: missing threshold spec")
                per_node.append(((1.0, ()),))
                continue
            entries = list(mixtures[v])
            _check_probabilities([p for p, _ in entries], where)
            vectors = []
            for prob, vector in entries:
                if len(vector) != degree:
                    raise InstanceError(f"{where}: vector length {len(vector)} != in-degree {degree}")
                row = []
                for value in vector:
                    threshold, was_clamped = _clamp_threshold(value, cap, where)
                    clamped += was_clamped
                    row.append(threshold)
                vectors.append((prob, tuple(row)))
            per_node.append(_merge(vectors))
        for v in mixtures:
            if not 0 <= v < graph.n:
                raise InstanceError(f"threshold spec for unknown node {v}")
        if clamped:
            logger.warning("Clamped %d threshold value(s) above B+1=%d", clamped, cap)
        return cls(TriggeringKind.NODE_MIXTURE, cap, node_supports=tuple(per_node))

    @classmethod
    def classical(
        cls,
        graph: DirectedGraph,
        subsets: Mapping[int, Iterable[tuple[float, Iterable[int]]]],
        budget: int,
    ) -> "TriggeringDistribution":
        per_node = []
        for v in range(graph.n):
            where = f"node {v}"
            if v not in subsets:
                if graph.in_neighbors[v]:
                    raise InstanceError(f"{where}: missing triggering-set spec")
                per_node.append(((1.0, frozenset()),))
                continue
            entries = [(prob, frozenset(members)) for prob, members in subsets[v]]
            _check_probabilities([p for p, _ in entries], where)
            allowed = set(graph.in_neighbors[v])
            merged: dict[frozenset[int], float] = {}
            for prob, members in entries:
                stray = members - allowed
                if stray:
                    raise InstanceError(f"{where}: triggering set contains non-in-neighbours {sorted(stray)}")
                merged[members] = merged.get(members, 0.0) + prob
            per_node.append(tuple((prob, members) for members, prob in merged.items()))
        for v in subsets:
            if not 0 <= v < graph.n:
                raise InstanceError(f"triggering-set spec for unknown node {v}")
        return cls(TriggeringKind.CLASSICAL, budget + 1, subset_supports=tuple(per_node))

    def node_support(self, graph: DirectedGraph, v: int) -> Support:
        """Joint distribution of the vector t^v over N(v), in in-neighbour order."""
        if self.kind is TriggeringKind.NODE_MIXTURE:
            return self.node_supports[v]
        if self.kind is TriggeringKind.CLASSICAL:
            sources = graph.in_neighbors[v]
            return tuple(
                (prob, tuple(0 if u in members else self.threshold_cap for u in sources))
                for prob, members in self.subset_supports[v]
            )
        edge_range = graph.node_edge_slices[v]
        columns = self.edge_supports[edge_range]
        joint = []
        for combo in itertools.product(*columns):
            prob = math.prod(p for _, p in combo)
            joint.append((prob, tuple(value for value, _ in combo)))
        return tuple(joint) if joint else ((1.0, ()),)

    def support_size(self, graph: DirectedGraph) -> int:
        if self.kind is TriggeringKind.EDGE_CATEGORICAL:
            return math.prod(len(s) for s in self.edge_supports)
        supports = self.node_supports if self.kind is TriggeringKind.NODE_MIXTURE else self.subset_supports
        return math.prod(len(s) for s in supports)


def encode_classical(
    graph: DirectedGraph,
    subsets: Mapping[int, Iterable[tuple[float, Iterable[int]]]],
    budget: int,
) -> TriggeringDistribution:
    """Encode triggering-set distributions as budgeted thresholds.

    A member of T^v gets threshold 0, every other in-neighbour gets B+1.
    """
    classical = TriggeringDistribution.classical(graph, subsets, budget)
    mixtures = {v: classical.node_support(graph, v) for v in range(graph.n)}
    return TriggeringDistribution.node_mixture(graph, mixtures, budget)


@dataclass(frozen=True)
class BudgetConstraints:
    budget: int
    capacities: tuple[int, ...]

    @classmethod
    def create(cls, budget: int, capacities: Sequence[int]) -> "BudgetConstraints":
        if int(budget) != budget or budget < 0:
            raise InstanceError(f"budget must be a non-negative integer, got {budget!r}")
        clamped, over = [], []
        for i, c in enumerate(capacities):
            # zero capacities only arise from a zero budget
            if int(c) != c or c < 1 and not (c == 0 and budget == 0):
                raise InstanceError(f"capacity of agent {i} must be a positive integer, got {c!r}")
            if c > budget:
                over.append(i)
            clamped.append(min(int(c), int(budget)))
        if over:
            logger.warning("Clamped capacities of agents %s to the budget B=%d", over, budget)
        return cls(int(budget), tuple(clamped))

    @property
    def n(self) -> int:
        return len(self.capacities)

    @property
    def search_space_size(self) -> int:
        return math.prod(c + 1 for c in self.capacities)

    def restricted_to(self, agents: Iterable[int]) -> "BudgetConstraints":
        """Same budget, capacities zeroed outside ``agents``."""
        keep = set(agents)
        return BudgetConstraints(
            self.budget, tuple(c if i in keep else 0 for i, c in enumerate(self.capacities))
        )

    def feasible_allocations(self) -> Iterator[BudgetAllocation]:
        """Every feasible allocation, in lexicographic order."""
        caps = self.capacities
        n = len(caps)
        prefix: list[int] = []

        def extend(i: int, remaining: int) -> Iterator[BudgetAllocation]:
            if i == n:
                yield tuple(prefix)
                return
            for k in range(min(caps[i], remaining) + 1):
                prefix.append(k)
                yield from extend(i + 1, remaining - k)
                prefix.pop()

        yield from extend(0, self.budget)


@dataclass(frozen=True)
class InfluenceInstance:
    graph: DirectedGraph
    triggering: TriggeringDistribution
    constraints: BudgetConstraints
    names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.constraints.n != self.graph.n:
            raise InstanceError(
                f"{self.constraints.n} capacities given for a graph with {self.graph.n} nodes"
            )
        if self.triggering.threshold_cap != self.constraints.budget + 1:
            raise InstanceError("triggering distribution was built for a different budget")
        if self.names is not None and len(self.names) != self.graph.n:
            raise InstanceError("names must list exactly one name per node")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def budget(self) -> int:
        return self.constraints.budget


# ---------------------------------------------------------------------------
# Lattice operations
# ---------------------------------------------------------------------------

def _check_lengths(x: Sequence[int], y: Sequence[int]) -> None:
    if len(x) != len(y):
        raise LengthMismatch(f"vectors of length {len(x)} and {len(y)}")


def lattice_join(x: Sequence[int], y: Sequence[int]) -> BudgetAllocation:
    _check_lengths(x, y)
    return tuple(max(a, b) for a, b in zip(x, y))


def lattice_meet(x: Sequence[int], y: Sequence[int]) -> BudgetAllocation:
    _check_lengths(x, y)
    return tuple(min(a, b) for a, b in zip(x, y))


def lattice_le(x: Sequence[int], y: Sequence[int]) -> bool:
    _check_lengths(x, y)
    return all(a <= b for a, b in zip(x, y))


def add_chi(b: Sequence[int], i: int, k: int) -> BudgetAllocation:
    """``b ∨ kχ_i``: coordinate ``i`` becomes ``max(b_i, k)``."""
    if not 0 <= i < len(b):
        raise IndexError(f"agent {i} out of range for n={len(b)}")
    out = list(b)
    out[i] = max(out[i], k)
    return tuple(out)


def add_units(b: Sequence[int], i: int, k: int) -> BudgetAllocation:
    """``b + kχ_i``: add ``k`` units to agent ``i``."""
    if not 0 <= i < len(b):
        raise IndexError(f"agent {i} out of range for n={len(b)}")
    out = list(b)
    out[i] += k
    return tuple(out)


def zero_allocation(n: int) -> BudgetAllocation:
    return (0,) * n


@dataclass(frozen=True)
class AllocationVerdict:
    feasible: bool
    capacity_violations: tuple[tuple[int, int, int], ...] = ()  # (agent, allocated, capacity)
    negative_entries: tuple[int, ...] = ()
    budget_excess: int = 0
    length_mismatch: bool = False

    def describe(self) -> str:
        if self.feasible:
            return "feasible"
        parts = []
        if self.length_mismatch:
            parts.append("length does not match the number of agents")
        parts += [f"capacity at i={i} ({b} > {c})" for i, b, c in self.capacity_violations]
        parts += [f"negative entry at i={i}" for i in self.negative_entries]
        if self.budget_excess:
            parts.append(f"budget exceeded by {self.budget_excess}")
        return "infeasible: " + "; ".join(parts)


def validate_allocation(b: Sequence[int], constraints: BudgetConstraints) -> AllocationVerdict:
    if len(b) != constraints.n:
        return AllocationVerdict(False, length_mismatch=True)
    capacity = tuple(
        (i, x, c) for i, (x, c) in enumerate(zip(b, constraints.capacities)) if x > c
    )
    negative = tuple(i for i, x in enumerate(b) if x < 0)
    excess = max(0, sum(b) - constraints.budget)
    feasible = not capacity and not negative and not excess
    return AllocationVerdict(feasible, capacity, negative, excess)
