"""Multi-player Budgeted Triggering game.

Every player spreads its own budget over the shared network. Budgeted nodes
take the color of their highest bidder at time 0; an activated node passes
its color along each live out-edge after a random delay, and the earliest
arrival colors a node for good. An edge ``v -> u`` is live when
``max_i b^i_v >= t^u_v`` (threshold 0 is word of mouth).

``PayoffOracle`` freezes thresholds, delays and tie-break priorities so that
best responses, equilibrium checks and price-of-anarchy runs all see the same
numbers (common random numbers).
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from typing import Dict, Iterator, Optional, Sequence

import numpy as np

from config.settings import (
    DEFAULT_GAME_SAMPLES,
    DEFAULT_MAX_ITERS,
    DEFAULT_STARTS,
    GAME_SCENARIO_LIMIT,
    SEARCH_LIMIT,
    TIE_TOLERANCE,
    TOLERANCE,
)
from services.cascade import Scenario, ScenarioBatch, cascade_value, enumerate_batch, sample_batch
from services.errors import InstanceError, LengthMismatch, SearchSpaceTooLarge
from services.model import (
    BudgetAllocation,
    BudgetConstraints,
    DirectedGraph,
    InfluenceInstance,
    TriggeringDistribution,
    lattice_join,
    lattice_meet,
    validate_allocation,
    zero_allocation,
)
from utils.seeding import SeedStreams, derive_seed

logger = logging.getLogger(__name__)

StrategyProfile = tuple[BudgetAllocation, ...]


class DelayKind(str, Enum):
    EXPONENTIAL = "exponential"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class DelaySpec:
    kind: DelayKind = DelayKind.EXPONENTIAL
    rate: float = 1.0
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if self.kind is DelayKind.EXPONENTIAL and not self.rate > 0:
            raise InstanceError(f"exponential delay rate must be positive, got {self.rate}")
        if self.kind is DelayKind.UNIFORM and not 0 <= self.low < self.high:
            raise InstanceError(f"uniform delay needs 0 <= low < high, got [{self.low}, {self.high})")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` positive, pairwise distinct delays."""
        while True:
            if self.kind is DelayKind.EXPONENTIAL:
                delays = rng.exponential(1.0 / self.rate, size)
            else:
                delays = rng.uniform(self.low, self.high, size)
            if np.all(delays > 0) and len(np.unique(delays)) == size:
                return delays

    def to_dict(self) -> Dict:
        if self.kind is DelayKind.EXPONENTIAL:
            return {"kind": self.kind.value, "rate": self.rate}
        return {"kind": self.kind.value, "low": self.low, "high": self.high}


@dataclass(frozen=True)
class GameInstance:
    """Shared network and thresholds, plus one budget constraint per player."""

    base: InfluenceInstance
    players: tuple[BudgetConstraints, ...]
    delay: DelaySpec = field(default_factory=DelaySpec)

    def __post_init__(self):
        if not self.players:
            raise InstanceError("a game needs at least one player")
        for i, player in enumerate(self.players):
            if player.n != self.base.n:
                raise InstanceError(f"player {i} has {player.n} capacities for {self.base.n} nodes")
            if player.budget > self.base.budget:
                raise InstanceError(
                    f"player {i} budget {player.budget} exceeds the instance budget {self.base.budget}"
                )

    @property
    def graph(self) -> DirectedGraph:
        return self.base.graph

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def num_players(self) -> int:
        return len(self.players)

    def zero_profile(self) -> StrategyProfile:
        return tuple(zero_allocation(self.n) for _ in self.players)


def joined_allocation(profile: Sequence[Sequence[int]]) -> BudgetAllocation:
    """max_i b^i, coordinate-wise."""
    return reduce(lattice_join, (tuple(row) for row in profile))


def replace_row(profile: StrategyProfile, player: int, row: Sequence[int]) -> StrategyProfile:
    return profile[:player] + (tuple(row),) + profile[player + 1:]


def check_profile(game: GameInstance, profile: Sequence[Sequence[int]]) -> StrategyProfile:
    """Normalise ``profile`` to tuples, rejecting wrong shapes and infeasible rows."""
    if len(profile) != game.num_players:
        raise LengthMismatch(f"profile has {len(profile)} rows for {game.num_players} players")
    rows = []
    for i, (row, player) in enumerate(zip(profile, game.players)):
        verdict = validate_allocation(row, player)
        if verdict.length_mismatch:
            raise LengthMismatch(f"row {i} has length {len(row)} for {game.n} nodes")
        if not verdict.feasible:
            raise InstanceError(f"row {i} is {verdict.describe()}")
        rows.append(tuple(int(x) for x in row))
    return tuple(rows)


# ---------------------------------------------------------------------------
# Colored cascade
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiplayerScenario:
    """Thresholds plus per-edge delays and per-node tie-break priority orders.

    ``delays`` follow ``graph.edges``; ``priorities[v]`` lists the players in
    the order they win a tie for the top bid at ``v``.
    """

    scenario: Scenario
    delays: tuple[float, ...]
    priorities: tuple[tuple[int, ...], ...]

    @property
    def graph(self) -> DirectedGraph:
        return self.scenario.graph


@dataclass(frozen=True)
class MultiplayerOutcome:
    colors: tuple[Optional[int], ...]
    payoffs: tuple[int, ...]
    times: tuple[float, ...]


def multiplayer_cascade(mscenario: MultiplayerScenario, profile: Sequence[Sequence[int]]) -> MultiplayerOutcome:
    """Event-driven colored cascade; earliest arrival fixes a node's color."""
    graph = mscenario.graph
    num_players = len(profile)
    joined = joined_allocation(profile)
    if len(joined) != graph.n:
        raise LengthMismatch(f"profile rows of length {len(joined)} for {graph.n} nodes")
    # simultaneous arrivals at a node resolve by that node's tie-break order
    ranks = [{player: rank for rank, player in enumerate(order)} for order in mscenario.priorities]
    events: list[tuple[float, int, int, int]] = []
    for v in range(graph.n):
        if joined[v] > 0:
            winner = next(i for i in mscenario.priorities[v] if profile[i][v] == joined[v])
            events.append((0.0, 0, v, winner))
    heapq.heapify(events)
    colors: list[Optional[int]] = [None] * graph.n
    times = [math.inf] * graph.n
    edge_index = graph.edge_index
    while events:
        t, _, v, color = heapq.heappop(events)
        if colors[v] is not None:
            continue
        colors[v], times[v] = color, t
        for u, threshold in mscenario.scenario.gated_out[v]:
            if colors[u] is None and joined[v] >= threshold:
                heapq.heappush(events, (t + mscenario.delays[edge_index[(v, u)]], ranks[u][color], u, color))
    payoffs = [0] * num_players
    for color in colors:
        if color is not None:
            payoffs[color] += 1
    assert sum(payoffs) == cascade_value(mscenario.scenario, joined), "colored counts do not match the joined cascade"
    return MultiplayerOutcome(tuple(colors), tuple(payoffs), tuple(times))


def sample_multiplayer_scenario(game: GameInstance, scenario: Scenario, seed) -> MultiplayerScenario:
    """Fresh delays and independent uniformly random priority orders."""
    rng = np.random.default_rng(seed)
    delays = game.delay.sample(rng, len(game.graph.edges))
    priorities = tuple(tuple(int(i) for i in rng.permutation(game.num_players)) for _ in range(game.n))
    return MultiplayerScenario(scenario, tuple(float(d) for d in delays), priorities)


def _stratified_priorities(rng: np.random.Generator, n: int, num_players: int, draws: int):
    """Priority tables for ``draws`` (a multiple of M) draws.

    Each block of M draws rotates one random base order per node, so every
    player heads the order exactly once per block.
    """
    tables = []
    for _ in range(draws // num_players):
        bases = [rng.permutation(num_players) for _ in range(n)]
        for r in range(num_players):
            tables.append(tuple(tuple(int(i) for i in np.roll(base, -r)) for base in bases))
    return tables


# ---------------------------------------------------------------------------
# Payoff oracle
# ---------------------------------------------------------------------------

class PayoffOracle:
    """Expected per-player payoffs over a frozen scenario set.

    Threshold scenarios are enumerated when ``support * draws`` fits under
    ``limit`` and sampled otherwise; every threshold scenario is paired with
    the same ``draws`` delay/tie-break draws (``samples`` rounded up to a
    multiple of M).
    """

    def __init__(self, game: GameInstance, samples: int = DEFAULT_GAME_SAMPLES, seed: int = 0,
                 limit: int = GAME_SCENARIO_LIMIT):
        if samples < 1:
            raise ValueError("samples must be at least 1")
        self.game = game
        self.n = game.n
        self.num_players = game.num_players
        self.seed = seed
        self.streams = SeedStreams(seed)
        self.draws = math.ceil(samples / self.num_players) * self.num_players
        support = game.base.triggering.support_size(game.graph)
        if support * self.draws <= limit:
            self.batch: ScenarioBatch = enumerate_batch(game.base)
            self.enumerated = True
        else:
            count = max(1, limit // self.draws)
            self.batch = sample_batch(game.base, count, self.streams.seed("scenario"))
            self.enumerated = False
            logger.info("Game thresholds sampled: %d scenarios (support %d too large)", count, support)
        delay_rng = self.streams.rng("delays")
        delays = [tuple(float(d) for d in game.delay.sample(delay_rng, len(game.graph.edges)))
                  for _ in range(self.draws)]
        priorities = _stratified_priorities(self.streams.rng("tie_break"), self.n, self.num_players, self.draws)
        self._weights = [float(w) for w in self.batch.weights]
        self._scenarios = [
            [MultiplayerScenario(scenario, delays[j], priorities[j]) for j in range(self.draws)]
            for scenario in self.batch.scenarios()
        ]
        self.query_count = 0
        self._cache: Dict[StrategyProfile, tuple[float, ...]] = {}
        self._social_cache: Dict[BudgetAllocation, float] = {}

    def payoffs(self, profile: Sequence[Sequence[int]]) -> tuple[float, ...]:
        """(f^1(b), ..., f^M(b))."""
        key = tuple(tuple(int(x) for x in row) for row in profile)
        if len(key) != self.num_players:
            raise LengthMismatch(f"profile has {len(key)} rows for {self.num_players} players")
        self.query_count += 1
        cached = self._cache.get(key)
        if cached is None:
            per_player = [[] for _ in range(self.num_players)]
            for weight, draws in zip(self._weights, self._scenarios):
                sums = [0] * self.num_players
                for mscenario in draws:
                    for i, count in enumerate(multiplayer_cascade(mscenario, key).payoffs):
                        sums[i] += count
                for i, total in enumerate(sums):
                    per_player[i].append(weight * (total / self.draws))
            cached = tuple(math.fsum(values) for values in per_player)
            self._cache[key] = cached
        return cached

    def payoff(self, profile: Sequence[Sequence[int]], player: int) -> float:
        return self.payoffs(profile)[player]

    def social_value(self, profile: Sequence[Sequence[int]]) -> float:
        """F(b) = Σ_i f^i(b), computed from the joined allocation."""
        return self.joined_value(joined_allocation(profile))

    def joined_value(self, joined: Sequence[int]) -> float:
        key = tuple(int(x) for x in joined)
        cached = self._social_cache.get(key)
        if cached is None:
            cached = self.batch.expected_value(key)
            self._social_cache[key] = cached
        return cached

    def usage_stats(self) -> Dict:
        return {
            "queries": self.query_count,
            "distinct_profiles": len(self._cache),
            "distinct_joins": len(self._social_cache),
            "threshold_scenarios": len(self.batch),
            "draws_per_scenario": self.draws,
            "enumerated": self.enumerated,
            "seeds": self.streams.as_dict(),
        }


def expected_payoffs(game: GameInstance, profile: Sequence[Sequence[int]], samples: int = DEFAULT_GAME_SAMPLES,
                     seed: int = 0) -> tuple[float, ...]:
    return PayoffOracle(game, samples, seed).payoffs(check_profile(game, profile))


# ---------------------------------------------------------------------------
# Best responses and equilibria
# ---------------------------------------------------------------------------

def _strategies(game: GameInstance, player: int) -> Iterator[BudgetAllocation]:
    constraints = game.players[player]
    if constraints.search_space_size > SEARCH_LIMIT:
        raise SearchSpaceTooLarge(constraints.search_space_size, SEARCH_LIMIT)
    return constraints.feasible_allocations()


def best_response(oracle: PayoffOracle, player: int, profile: Sequence[Sequence[int]]) -> tuple[BudgetAllocation, float]:
    """Exhaustive best response; ties go to the lexicographically smallest allocation."""
    profile = tuple(tuple(row) for row in profile)
    best, best_value = None, float("-inf")
    for row in _strategies(oracle.game, player):
        value = oracle.payoff(replace_row(profile, player, row), player)
        if value > best_value + TIE_TOLERANCE:
            best, best_value = row, value
    return best, best_value


class DynamicsStatus(str, Enum):
    CONVERGED = "converged"
    CYCLE = "cycle"
    ITERATION_CAP = "iteration_cap"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class DynamicsReport:
    status: DynamicsStatus
    profile: StrategyProfile
    rounds: int
    moves: int

    def to_dict(self) -> Dict:
        return {
            "status": self.status.value,
            "profile": [list(row) for row in self.profile],
            "rounds": self.rounds,
            "moves": self.moves,
        }


def best_response_dynamics(oracle: PayoffOracle, initial: Sequence[Sequence[int]],
                           max_iters: int = DEFAULT_MAX_ITERS) -> DynamicsReport:
    """Round-robin best responses; a player moves only on strict improvement."""
    profile = check_profile(oracle.game, initial)
    if max_iters < 1:
        return DynamicsReport(DynamicsStatus.UNDECIDED, profile, 0, 0)
    seen = {profile}
    moves = 0
    for round_number in range(1, max_iters + 1):
        changed = False
        for player in range(oracle.num_players):
            current = oracle.payoff(profile, player)
            row, value = best_response(oracle, player, profile)
            if value > current + TIE_TOLERANCE:
                profile = replace_row(profile, player, row)
                moves += 1
                changed = True
                if profile in seen:
                    logger.warning("Best-response dynamics revisited a profile after %d moves", moves)
                    return DynamicsReport(DynamicsStatus.CYCLE, profile, round_number, moves)
                seen.add(profile)
        if not changed:
            return DynamicsReport(DynamicsStatus.CONVERGED, profile, round_number, moves)
    logger.warning("Best-response dynamics did not settle within %d rounds", max_iters)
    return DynamicsReport(DynamicsStatus.ITERATION_CAP, profile, max_iters, moves)


@dataclass(frozen=True)
class Deviation:
    player: int
    current_value: float
    best_allocation: BudgetAllocation
    best_value: float

    @property
    def gain(self) -> float:
        return self.best_value - self.current_value


@dataclass(frozen=True)
class NashVerdict:
    is_nash: bool
    deviations: tuple[Deviation, ...]

    def to_dict(self) -> Dict:
        return {
            "is_nash": self.is_nash,
            "deviations": [
                {
                    "player": d.player,
                    "current_value": d.current_value,
                    "best_allocation": list(d.best_allocation),
                    "best_value": d.best_value,
                    "gain": d.gain,
                }
                for d in self.deviations
            ],
        }


def is_nash(oracle: PayoffOracle, profile: Sequence[Sequence[int]]) -> NashVerdict:
    profile = check_profile(oracle.game, profile)
    deviations = []
    for player in range(oracle.num_players):
        current = oracle.payoff(profile, player)
        row, value = best_response(oracle, player, profile)
        deviations.append(Deviation(player, current, row, value))
    stable = all(d.best_value <= d.current_value + TOLERANCE for d in deviations)
    return NashVerdict(stable, tuple(deviations))


# ---------------------------------------------------------------------------
# Instances, social optimum, utility-game conditions, price of anarchy
# ---------------------------------------------------------------------------

def star_poa_instance(num_leaves: int, delay: Optional[DelaySpec] = None) -> GameInstance:
    """Star (center 0, leaves 1..N) plus N isolated nodes; every edge always fires; N players with B=1."""
    if num_leaves < 1:
        raise InstanceError(f"the star needs at least one leaf, got {num_leaves}")
    n = 2 * num_leaves + 1
    edges = [(0, leaf) for leaf in range(1, num_leaves + 1)]
    graph = DirectedGraph.from_edges(n, edges)
    triggering = TriggeringDistribution.edge_categorical(graph, {edge: [(0, 1.0)] for edge in edges}, 1)
    constraints = BudgetConstraints.create(1, [1] * n)
    base = InfluenceInstance(graph, triggering, constraints)
    return GameInstance(base, tuple(constraints for _ in range(num_leaves)), delay or DelaySpec())


def _count_multisets(options: int, size: int) -> int:
    return math.comb(options + size - 1, size)


def social_optimum(oracle: PayoffOracle) -> tuple[StrategyProfile, float]:
    """Joint optimum of F over feasible profiles.

    F only sees the joined allocation, so players sharing a constraint are
    enumerated as multisets of strategies.
    """
    game = oracle.game
    groups: Dict[BudgetConstraints, list[int]] = {}
    for i, player in enumerate(game.players):
        groups.setdefault(player, []).append(i)
    options = {}
    size = 1
    for constraints, members in groups.items():
        if constraints.search_space_size > SEARCH_LIMIT:
            raise SearchSpaceTooLarge(constraints.search_space_size, SEARCH_LIMIT)
        options[constraints] = list(constraints.feasible_allocations())
        size *= _count_multisets(len(options[constraints]), len(members))
    if size > SEARCH_LIMIT:
        raise SearchSpaceTooLarge(size, SEARCH_LIMIT)
    group_choices = [
        itertools.combinations_with_replacement(options[constraints], len(members))
        for constraints, members in groups.items()
    ]
    best, best_value = None, float("-inf")
    for choice in itertools.product(*group_choices):
        rows: list[Optional[BudgetAllocation]] = [None] * game.num_players
        for (constraints, members), picked in zip(groups.items(), choice):
            for player, row in zip(members, picked):
                rows[player] = row
        profile = tuple(rows)
        value = oracle.social_value(profile)
        if value > best_value + TIE_TOLERANCE:
            best, best_value = profile, value
    return best, best_value


def random_profile(game: GameInstance, rng: np.random.Generator) -> StrategyProfile:
    rows = []
    for player in game.players:
        strategies = list(player.feasible_allocations())
        rows.append(strategies[int(rng.integers(len(strategies)))])
    return tuple(rows)


@dataclass
class UtilityReport:
    profiles_checked: int = 0
    pairs_checked: int = 0
    u1_violations: list[Dict] = field(default_factory=list)
    u2_violations: list[Dict] = field(default_factory=list)
    u3_violations: list[Dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not (self.u1_violations or self.u2_violations or self.u3_violations)

    def to_dict(self) -> Dict:
        return {
            "passed": self.passed,
            "profiles_checked": self.profiles_checked,
            "pairs_checked": self.pairs_checked,
            "u1_violations": self.u1_violations,
            "u2_violations": self.u2_violations,
            "u3_violations": self.u3_violations,
        }


def _rows(profile) -> list[list[int]]:
    return [list(row) for row in profile]


def verify_utility_conditions(oracle: PayoffOracle, profiles: int, seed: int,
                              pairs: Optional[int] = None) -> UtilityReport:
    """Check U1 (F monotone submodular), U2 (F = Σ f^i) and U3 (f^i >= marginal of player i).

    U2 and U3 run on ``profiles`` sampled profiles; U1 runs on ``pairs`` independent
    random profile pairs (default: as many as profiles) drawn from their own stream.
    """
    game = oracle.game
    rng = np.random.default_rng(seed)
    pair_rng = np.random.default_rng(derive_seed(seed, "utility_pairs"))
    report = UtilityReport()
    for _ in range(profiles):
        profile = random_profile(game, rng)
        report.profiles_checked += 1
        payoffs = oracle.payoffs(profile)
        social = oracle.social_value(profile)
        if abs(math.fsum(payoffs) - social) > TOLERANCE:
            report.u2_violations.append({"profile": _rows(profile), "sum_payoffs": math.fsum(payoffs), "F": social})
        for player in range(game.num_players):
            without = oracle.social_value(replace_row(profile, player, zero_allocation(game.n)))
            if payoffs[player] < social - without - TOLERANCE:
                report.u3_violations.append({
                    "profile": _rows(profile), "player": player,
                    "payoff": payoffs[player], "marginal": social - without,
                })
    for _ in range(profiles if pairs is None else pairs):
        x, y = random_profile(game, pair_rng), random_profile(game, pair_rng)
        report.pairs_checked += 1
        join = tuple(lattice_join(a, b) for a, b in zip(x, y))
        meet = tuple(lattice_meet(a, b) for a, b in zip(x, y))
        fx, fy = oracle.social_value(x), oracle.social_value(y)
        fj, fm = oracle.social_value(join), oracle.social_value(meet)
        if fx + fy < fj + fm - TOLERANCE or fm > min(fx, fy) + TOLERANCE or max(fx, fy) > fj + TOLERANCE:
            report.u1_violations.append({"x": _rows(x), "y": _rows(y), "F": [fx, fy, fj, fm]})
    return report


@dataclass
class PoAReport:
    ratio: Optional[float]
    social_opt_value: float
    social_opt_profile: StrategyProfile
    worst_ne_value: Optional[float]
    worst_ne_profile: Optional[StrategyProfile]
    equilibria: list[tuple[StrategyProfile, float]]
    dynamics: list[DynamicsReport]

    def to_dict(self) -> Dict:
        return {
            "ratio": self.ratio,
            "social_opt_value": self.social_opt_value,
            "social_opt_profile": _rows(self.social_opt_profile),
            "worst_ne_value": self.worst_ne_value,
            "worst_ne_profile": _rows(self.worst_ne_profile) if self.worst_ne_profile else None,
            "equilibria": [{"profile": _rows(p), "F": v} for p, v in self.equilibria],
            "dynamics": [d.to_dict() for d in self.dynamics],
        }


def herd_profile(oracle: PayoffOracle) -> StrategyProfile:
    """Every player plays its best response to the empty profile."""
    zero = oracle.game.zero_profile()
    return tuple(best_response(oracle, i, zero)[0] for i in range(oracle.num_players))


def empirical_poa(oracle: PayoffOracle, starts: int = DEFAULT_STARTS, seed: int = 0,
                  max_iters: int = DEFAULT_MAX_ITERS) -> PoAReport:
    """F(social optimum) / F(worst equilibrium found).

    Dynamics start from the empty profile, the herd profile and ``starts - 2``
    random feasible profiles; only endpoints that pass ``is_nash`` count.
    """
    game = oracle.game
    opt_profile, opt_value = social_optimum(oracle)
    rng = np.random.default_rng(seed)
    initial = [game.zero_profile(), herd_profile(oracle)]
    initial += [random_profile(game, rng) for _ in range(max(0, starts - len(initial)))]
    dynamics, equilibria, seen = [], [], set()
    for start in initial:
        report = best_response_dynamics(oracle, start, max_iters)
        dynamics.append(report)
        if report.profile in seen:
            continue
        seen.add(report.profile)
        if is_nash(oracle, report.profile).is_nash:
            equilibria.append((report.profile, oracle.social_value(report.profile)))
    if not equilibria:
        logger.warning("No equilibrium found from %d starts", len(dynamics))
        return PoAReport(None, opt_value, opt_profile, None, None, equilibria, dynamics)
    worst_profile, worst_value = min(equilibria, key=lambda item: item[1])
    if worst_value > TOLERANCE:
        ratio = opt_value / worst_value
    else:
        ratio = 1.0 if opt_value <= TOLERANCE else math.inf
    return PoAReport(ratio, opt_value, opt_profile, worst_value, worst_profile, equilibria, dynamics)
