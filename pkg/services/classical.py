"""Reference simulator for the classical (set-based) Triggering model.

Written against triggering sets directly, with no thresholds involved, so it
can cross-check the budgeted cascade on ``encode_classical`` instances.
"""
import itertools
import math
from typing import Iterable, Mapping

from services.model import DirectedGraph


def triggering_spread(graph: DirectedGraph, triggering_sets: Mapping[int, frozenset], seeds: Iterable[int]) -> int:
    """Nodes reached from ``seeds`` when v activates once a member of T^v is active."""
    active = set(seeds)
    changed = True
    while changed:
        changed = False
        for v in range(graph.n):
            if v not in active and triggering_sets.get(v, frozenset()) & active:
                active.add(v)
                changed = True
    return len(active)


def expected_triggering_spread(
    graph: DirectedGraph,
    subsets: Mapping[int, Iterable[tuple[float, Iterable[int]]]],
    seeds: Iterable[int],
) -> float:
    """Exact expected spread, enumerating every joint choice of triggering sets."""
    seeds = set(seeds)
    nodes = sorted(subsets)
    choices = [[(p, frozenset(members)) for p, members in subsets[v]] for v in nodes]
    total = []
    for combo in itertools.product(*choices):
        prob = math.prod(p for p, _ in combo)
        sets = {v: members for v, (_, members) in zip(nodes, combo)}
        total.append(prob * triggering_spread(graph, sets, seeds))
    return math.fsum(total)
