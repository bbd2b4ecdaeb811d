"""Maximise a monotone lattice-submodular oracle under capacities and a total budget.

The concrete solver is a density greedy over ``(agent, k)`` increments, with a
partial-enumeration wrapper and the best single-agent allocation as a guard
against knapsack traps.
"""
import itertools
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence

from config.settings import DEFAULT_ENUM_DEPTH, SEARCH_LIMIT, TIE_TOLERANCE
from services.errors import SearchSpaceTooLarge
from services.model import (
    BudgetAllocation,
    BudgetConstraints,
    add_chi,
    add_units,
    validate_allocation,
    zero_allocation,
)
from services.oracle import ValueOracle

logger = logging.getLogger(__name__)


class SolverMode(str, Enum):
    BRUTE_FORCE = "brute_force"
    GREEDY = "greedy"
    GREEDY_PARTIAL_ENUM = "greedy_partial_enum"


@dataclass(frozen=True)
class SolverConfig:
    mode: SolverMode = SolverMode.GREEDY_PARTIAL_ENUM
    enum_depth: int = DEFAULT_ENUM_DEPTH
    search_limit: int = SEARCH_LIMIT

    def __post_init__(self):
        if self.enum_depth not in (1, 2, 3):
            raise ValueError(f"enum_depth must be 1, 2 or 3, got {self.enum_depth}")


@dataclass(frozen=True)
class GreedyTrace:
    allocation: BudgetAllocation
    values: tuple[float, ...]  # objective after each accepted increment

    @property
    def value(self) -> float:
        return self.values[-1]


@dataclass(frozen=True)
class SolveResult:
    allocation: BudgetAllocation
    value: float
    mode: SolverMode
    best_single_used: bool
    queries: int
    wall_time: float
    extra: dict = field(default_factory=dict)

    def report(self) -> dict:
        return {
            "mode": self.mode.value,
            "allocation": list(self.allocation),
            "value": self.value,
            "best_single_used": self.best_single_used,
            "oracle_queries": self.queries,
            "wall_time": self.wall_time,
            **self.extra,
        }


def brute_force_opt(oracle: ValueOracle, constraints: BudgetConstraints,
                    limit: Optional[int] = None) -> tuple[BudgetAllocation, float]:
    """Exhaustive optimum; ties go to the lexicographically smallest allocation."""
    limit = SEARCH_LIMIT if limit is None else limit
    size = constraints.search_space_size
    if size > limit:
        raise SearchSpaceTooLarge(size, limit)
    best, best_value = None, float("-inf")
    for b in constraints.feasible_allocations():
        v = oracle.value(b)
        if v > best_value + TIE_TOLERANCE:
            best, best_value = b, v
    return best, best_value


def greedy_trace(oracle: ValueOracle, constraints: BudgetConstraints,
                 start: Optional[Sequence[int]] = None) -> GreedyTrace:
    """Density greedy from ``start``: repeatedly take the increment with the best gain per unit.

    Increments of every size ``k`` are considered, since lattice marginals are
    not concave per coordinate. Ties go to the lowest agent, then the smallest k.
    """
    caps, budget = constraints.capacities, constraints.budget
    b = tuple(start) if start is not None else zero_allocation(constraints.n)
    value = oracle.value(b)
    used = sum(b)
    values = [value]
    while used < budget:
        best = None
        for i in range(constraints.n):
            room = min(caps[i] - b[i], budget - used)
            for k in range(1, room + 1):
                candidate = add_units(b, i, k)
                gain = oracle.value(candidate) - value
                if gain <= TIE_TOLERANCE:
                    continue
                density = gain / k
                if best is None or density > best[0] + TIE_TOLERANCE:
                    best = (density, candidate, k)
        if best is None:
            break
        _, b, k = best
        used += k
        value = oracle.value(b)
        values.append(value)
    return GreedyTrace(b, tuple(values))


def density_greedy(oracle: ValueOracle, constraints: BudgetConstraints) -> BudgetAllocation:
    return greedy_trace(oracle, constraints).allocation


def seed_assignments(constraints: BudgetConstraints, depth: int) -> Iterator[tuple[tuple[int, int], ...]]:
    """Feasible sets of at most ``depth`` (agent, budget) pairs on distinct agents, empty set first."""
    agents = [i for i, c in enumerate(constraints.capacities) if c > 0]
    yield ()
    for size in range(1, depth + 1):
        for chosen in itertools.combinations(agents, size):
            ranges = [range(1, constraints.capacities[i] + 1) for i in chosen]
            for amounts in itertools.product(*ranges):
                if sum(amounts) <= constraints.budget:
                    yield tuple(zip(chosen, amounts))


def greedy_partial_enum(oracle: ValueOracle, constraints: BudgetConstraints,
                        enum_depth: int = DEFAULT_ENUM_DEPTH) -> BudgetAllocation:
    """Best greedy completion over every small seed assignment."""
    best, best_value = None, float("-inf")
    seeds = 0
    for assignment in seed_assignments(constraints, enum_depth):
        seeds += 1
        start = zero_allocation(constraints.n)
        for i, k in assignment:
            start = add_chi(start, i, k)
        trace = greedy_trace(oracle, constraints, start)
        if trace.value > best_value + TIE_TOLERANCE:
            best, best_value = trace.allocation, trace.value
    logger.debug("Partial enumeration (depth %d) completed %d seeds", enum_depth, seeds)
    return best


def best_single(oracle: ValueOracle, constraints: BudgetConstraints) -> BudgetAllocation:
    """c_iχ_i with the largest value; ties go to the lowest index."""
    zero = zero_allocation(constraints.n)
    best, best_value = zero, float("-inf")
    for i, c in enumerate(constraints.capacities):
        candidate = add_chi(zero, i, c)
        v = oracle.value(candidate)
        if v > best_value + TIE_TOLERANCE:
            best, best_value = candidate, v
    return best


def solve(oracle: ValueOracle, constraints: BudgetConstraints,
          config: Optional[SolverConfig] = None) -> SolveResult:
    """Run the configured solver and keep the better of it and ``best_single``."""
    config = config or SolverConfig()
    started = time.perf_counter()
    queries_before = oracle.query_count
    if config.mode is SolverMode.BRUTE_FORCE:
        b, _ = brute_force_opt(oracle, constraints, config.search_limit)
    elif config.mode is SolverMode.GREEDY:
        b = density_greedy(oracle, constraints)
    else:
        b = greedy_partial_enum(oracle, constraints, config.enum_depth)
    value = oracle.value(b)
    single = best_single(oracle, constraints)
    single_value = oracle.value(single)
    used_single = single_value > value + TIE_TOLERANCE
    if used_single:
        logger.info("Best single-agent allocation beats %s (%.6g > %.6g)", config.mode.value, single_value, value)
        b, value = single, single_value
    assert validate_allocation(b, constraints).feasible, "solver returned an infeasible allocation"
    return SolveResult(
        allocation=b,
        value=value,
        mode=config.mode,
        best_single_used=used_single,
        queries=oracle.query_count - queries_before,
        wall_time=time.perf_counter() - started,
    )
