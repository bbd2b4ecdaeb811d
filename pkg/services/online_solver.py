"""Random-order online budget allocation.

Agents arrive in a uniformly random order with sorted uniform arrival times.
``LightInfluence`` observes the first half (by time) and then accepts budget
whose per-unit marginal clears ``alpha * f(b^L) / B``; the secretary rule
spends a full capacity on one agent; ``combined_allocate`` mixes the two.
``analysis_weights`` and ``empirical_var_y`` support empirical checks of the
analysis (w_i, β, Y).
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, Optional, Sequence

import numpy as np
import pandas as pd

from config.settings import DEFAULT_ALPHA, DEFAULT_P_SECRETARY, TIE_TOLERANCE, TOLERANCE
from services.errors import OracleAccessError
from services.model import (
    BudgetAllocation,
    BudgetConstraints,
    InfluenceInstance,
    add_chi,
    validate_allocation,
    zero_allocation,
)
from services.offline_solver import SolverConfig, SolverMode, brute_force_opt, solve
from services.oracle import InfluenceOracle, ValueOracle
from utils.seeding import SeedStreams

logger = logging.getLogger(__name__)


class Branch(str, Enum):
    SECRETARY = "secretary"
    LIGHT_INFLUENCE = "light_influence"


class ExploreMode(str, Enum):
    BRUTE = "brute"
    GREEDY = "greedy"


@dataclass(frozen=True)
class ArrivalStream:
    order: tuple[int, ...]
    times: tuple[float, ...]

    def __post_init__(self):
        if len(self.order) != len(self.times):
            raise ValueError("order and times must have the same length")
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("order must be a permutation of the agents")
        if any(not 0.0 <= t < 1.0 for t in self.times):
            raise ValueError("arrival times must lie in [0, 1)")
        if any(a >= b for a, b in zip(self.times, self.times[1:])):
            raise ValueError("arrival times must be strictly increasing")

    def __iter__(self) -> Iterator[tuple[int, float]]:
        return iter(zip(self.order, self.times))

    def __len__(self) -> int:
        return len(self.order)


def gen_stream(n: int, seed) -> ArrivalStream:
    """Sorted i.i.d. uniform times paired with a uniformly random arrival order."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    times = np.sort(rng.random(n))
    while len(np.unique(times)) < n:
        times = np.sort(rng.random(n))
    order = rng.permutation(n)
    return ArrivalStream(tuple(int(a) for a in order), tuple(float(t) for t in times))


class RestrictedOracle:
    """Oracle view limited to the agents revealed so far."""

    def __init__(self, oracle: ValueOracle):
        self.oracle = oracle
        self.n = oracle.n
        self.revealed: set[int] = set()
        self.query_count = 0

    def reveal(self, agent: int):
        self.revealed.add(agent)

    def value(self, b: Sequence[int]) -> float:
        for j, x in enumerate(b):
            if x > 0 and j not in self.revealed:
                raise OracleAccessError(f"query puts budget on unrevealed agent {j}")
        self.query_count += 1
        return self.oracle.value(b)

    __call__ = value


@dataclass(frozen=True)
class LIDecision:
    agent: int
    before: BudgetAllocation
    base_value: float
    threshold_per_unit: float
    marginals: tuple[float, ...]  # marginals[k - 1] = f(b ∨ kχ_i) - f(b) for every feasible k
    chosen: int  # 0 when K_i is empty

    def accepts(self, k: int) -> bool:
        return self.marginals[k - 1] >= k * self.threshold_per_unit - TIE_TOLERANCE


class LightInfluence:
    """Threshold algorithm: observe L = {t_i <= 1/2}, then allocate greedily above a per-unit bar.

    K_i = {k : 1 <= k <= c_i, k + Σ_{j≠i} b_j <= B, f(b ∨ kχ_i) - f(b) >= α k f(b^L) / B};
    the largest k in K_i is allocated.
    """

    def __init__(self, oracle: RestrictedOracle, constraints: BudgetConstraints,
                 alpha: float = DEFAULT_ALPHA, explore: ExploreMode = ExploreMode.BRUTE,
                 exploration_cache: Optional[Dict[frozenset, float]] = None):
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.oracle = oracle
        self.constraints = constraints
        self.alpha = alpha
        self.explore_mode = ExploreMode(explore)
        self.exploration_cache = exploration_cache if exploration_cache is not None else {}
        self.exploration_value = 0.0
        self.observed: tuple[int, ...] = ()
        self.decisions: list[LIDecision] = []
        if self.explore_mode is ExploreMode.GREEDY:
            logger.warning("Greedy exploration solver: f(b^L) is approximate and the analysed guarantee does not apply")

    def explore(self, agents: Sequence[int]) -> float:
        """f(b^L): optimum of the sub-instance restricted to ``agents``."""
        if not agents:
            return 0.0
        key = frozenset(agents)
        if key in self.exploration_cache:
            return self.exploration_cache[key]
        restricted = self.constraints.restricted_to(agents)
        if self.explore_mode is ExploreMode.BRUTE:
            _, value = brute_force_opt(self.oracle, restricted)
        else:
            value = solve(self.oracle, restricted, SolverConfig(SolverMode.GREEDY_PARTIAL_ENUM)).value
        self.exploration_cache[key] = value
        return value

    def run(self, stream: ArrivalStream) -> BudgetAllocation:
        budget, caps = self.constraints.budget, self.constraints.capacities
        self.observed = tuple(agent for agent, t in stream if t <= 0.5)
        for agent in self.observed:
            self.oracle.reveal(agent)
        self.exploration_value = self.explore(self.observed)
        unit = self.alpha * self.exploration_value / budget if budget > 0 else 0.0
        b = zero_allocation(self.constraints.n)
        used = 0
        for agent, t in stream:
            if t <= 0.5:
                continue
            self.oracle.reveal(agent)
            base = self.oracle.value(b)
            room = min(caps[agent], budget - used)
            marginals = tuple(self.oracle.value(add_chi(b, agent, k)) - base for k in range(1, room + 1))
            accepted = [k for k, gain in enumerate(marginals, start=1) if gain >= k * unit - TIE_TOLERANCE]
            chosen = max(accepted, default=0)
            self.decisions.append(LIDecision(agent, b, base, unit, marginals, chosen))
            if chosen:
                b = add_chi(b, agent, chosen)
                used += chosen
                logger.debug("LI allocates %d to agent %d (marginal %.6g)", chosen, agent, marginals[chosen - 1])
        return b


def li_allocate(stream: ArrivalStream, oracle: RestrictedOracle, constraints: BudgetConstraints,
                alpha: float = DEFAULT_ALPHA, explore: ExploreMode = ExploreMode.BRUTE) -> BudgetAllocation:
    return LightInfluence(oracle, constraints, alpha, explore).run(stream)


def secretary_allocate(stream: ArrivalStream, oracle: RestrictedOracle,
                       constraints: BudgetConstraints) -> BudgetAllocation:
    """Skip floor(n/e) agents, then give c_j to the first agent beating all of them."""
    n = len(stream)
    skip = math.floor(n / math.e) if n >= 3 else 0
    zero = zero_allocation(constraints.n)
    benchmark = float("-inf")
    for position, (agent, _) in enumerate(stream):
        oracle.reveal(agent)
        candidate = add_chi(zero, agent, constraints.capacities[agent])
        value = oracle.value(candidate)
        if position < skip:
            benchmark = max(benchmark, value)
        elif value > benchmark + TIE_TOLERANCE:
            return candidate
    return zero


def branch_coin(seed) -> float:
    return float(np.random.default_rng(seed).random())


@dataclass(frozen=True)
class OnlineOutcome:
    branch: Branch
    allocation: BudgetAllocation
    coin: float
    decisions: tuple[LIDecision, ...] = ()
    exploration_value: Optional[float] = None


def combined_allocate(stream: ArrivalStream, oracle: RestrictedOracle, constraints: BudgetConstraints,
                      alpha: float = DEFAULT_ALPHA, p_secretary: float = DEFAULT_P_SECRETARY, seed=None,
                      explore: ExploreMode = ExploreMode.BRUTE,
                      exploration_cache: Optional[Dict[frozenset, float]] = None) -> OnlineOutcome:
    """Secretary with probability ``p_secretary``, Light Influence otherwise."""
    coin = branch_coin(seed)
    if coin <= p_secretary:
        b = secretary_allocate(stream, oracle, constraints)
        outcome = OnlineOutcome(Branch.SECRETARY, b, coin)
    else:
        algorithm = LightInfluence(oracle, constraints, alpha, explore, exploration_cache)
        b = algorithm.run(stream)
        outcome = OnlineOutcome(Branch.LIGHT_INFLUENCE, b, coin, tuple(algorithm.decisions),
                                algorithm.exploration_value)
    assert validate_allocation(b, constraints).feasible, "online allocation is infeasible"
    return outcome


def theoretical_bound(beta: float) -> float:
    """Lower bound on E[f(b)]/OPT of the mixture as a function of β."""
    bound = 3.0 * beta / (8.0 * math.e)
    if beta <= 0.2:
        bound += (5.0 / 8.0) * (1.0 - math.sqrt(beta)) ** 2 / 20.0
    return bound


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    branch: Branch
    allocation: BudgetAllocation
    value: float
    ratio: float


@dataclass
class TrialSummary:
    mean_ratio: float
    std_error: float
    opt_allocation: BudgetAllocation
    opt_value: float
    beta: float
    branches: Dict[str, Dict] = field(default_factory=dict)
    records: list[TrialRecord] = field(default_factory=list)
    queries: int = 0

    def to_dict(self) -> Dict:
        return {
            "mean_ratio": self.mean_ratio,
            "std_error": self.std_error,
            "opt_allocation": list(self.opt_allocation),
            "opt_value": self.opt_value,
            "beta": self.beta,
            "theoretical_bound": theoretical_bound(self.beta),
            "branches": self.branches,
            "oracle_queries": self.queries,
            "trials": [
                {
                    "trial": r.trial,
                    "branch": r.branch.value,
                    "allocation": list(r.allocation),
                    "value": r.value,
                    "ratio": r.ratio,
                }
                for r in self.records
            ],
        }


def competitive_trials(instance: InfluenceInstance, trials: int, seed: int,
                       alpha: float = DEFAULT_ALPHA, p_secretary: float = DEFAULT_P_SECRETARY,
                       explore: ExploreMode = ExploreMode.BRUTE,
                       oracle: Optional[ValueOracle] = None) -> TrialSummary:
    """Mean of f(b)/OPT over independent arrival orders and coin flips.

    Trials with OPT = 0 count as ratio 1.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    oracle = oracle or InfluenceOracle.exact(instance)
    constraints = instance.constraints
    queries_before = oracle.query_count
    opt_allocation, opt_value = brute_force_opt(oracle, constraints)
    streams = SeedStreams(seed)
    exploration_cache: Dict[frozenset, float] = {}
    records = []
    for t in range(trials):
        stream = gen_stream(instance.n, streams.seed("arrival", t))
        outcome = combined_allocate(stream, RestrictedOracle(oracle), constraints, alpha, p_secretary,
                                    streams.seed("coins", t), explore, exploration_cache)
        value = oracle.value(outcome.allocation)
        ratio = value / opt_value if opt_value > TOLERANCE else 1.0
        records.append(TrialRecord(t, outcome.branch, outcome.allocation, value, ratio))

    frame = pd.DataFrame({"branch": [r.branch.value for r in records], "ratio": [r.ratio for r in records]})
    std_error = float(frame["ratio"].std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    branches = {}
    for name, group in frame.groupby("branch"):
        sem = group["ratio"].sem() if len(group) > 1 else 0.0
        branches[str(name)] = {
            "count": int(len(group)),
            "frequency": len(group) / trials,
            "mean_ratio": float(group["ratio"].mean()),
            "std_error": float(sem),
        }
    weights = analysis_weights(oracle, constraints, opt_allocation)
    logger.info("Competitive trials: mean ratio %.4f over %d trials", frame["ratio"].mean(), trials)
    return TrialSummary(
        mean_ratio=float(frame["ratio"].mean()),
        std_error=std_error,
        opt_allocation=opt_allocation,
        opt_value=opt_value,
        beta=weights.beta,
        branches=branches,
        records=records,
        queries=oracle.query_count - queries_before,
    )


@dataclass(frozen=True)
class AnalysisWeights:
    weights: tuple[float, ...]  # indexed by agent
    beta: float
    opt_value: float
    opt_allocation: BudgetAllocation
    order: tuple[int, ...]

    def y(self, membership: Sequence[int]) -> float:
        """Y = Σ w_i X_i / f(OPT*) for an L-membership indicator vector."""
        if self.opt_value <= 0:
            return 0.0
        return sum(w * x for w, x in zip(self.weights, membership)) / self.opt_value


def analysis_weights(oracle: ValueOracle, constraints: BudgetConstraints,
                     opt_allocation: Optional[Sequence[int]] = None,
                     order: Optional[Sequence[int]] = None) -> AnalysisWeights:
    """w_i = f(OPT*_{<i} ∨ OPT*_i χ_i) - f(OPT*_{<i}) along ``order``, and β = max_i f(c_iχ_i)/f(OPT*)."""
    if opt_allocation is None:
        opt_allocation, _ = brute_force_opt(oracle, constraints)
    opt_allocation = tuple(opt_allocation)
    order = tuple(order) if order is not None else tuple(range(constraints.n))
    opt_value = oracle.value(opt_allocation)
    weights = [0.0] * constraints.n
    prefix = zero_allocation(constraints.n)
    previous = oracle.value(prefix)
    for i in order:
        prefix = add_chi(prefix, i, opt_allocation[i])
        current = oracle.value(prefix)
        weights[i] = current - previous
        previous = current
    zero = zero_allocation(constraints.n)
    best_single_value = max(oracle.value(add_chi(zero, i, c)) for i, c in enumerate(constraints.capacities))
    beta = best_single_value / opt_value if opt_value > TOLERANCE else 0.0
    return AnalysisWeights(tuple(weights), beta, opt_value, opt_allocation, order)


@dataclass(frozen=True)
class VarianceCheck:
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    bound: float  # β / 4

    def to_dict(self) -> Dict:
        return {
            "mean": self.mean,
            "mean_se": self.mean_se,
            "variance": self.variance,
            "variance_se": self.variance_se,
            "bound": self.bound,
        }


def empirical_var_y(weights: AnalysisWeights, samples: int, seed) -> VarianceCheck:
    """Sample Y with X_i ~ Bernoulli(1/2) and compare Var[Y] against β/4."""
    if samples < 2:
        raise ValueError("samples must be at least 2")
    rng = np.random.default_rng(seed)
    w = np.asarray(weights.weights, dtype=np.float64)
    x = rng.integers(0, 2, size=(samples, len(w)))
    y = x @ w / weights.opt_value if weights.opt_value > 0 else np.zeros(samples)
    mean = float(y.mean())
    variance = float(y.var(ddof=1))
    centered = y - mean
    fourth = float(np.mean(centered ** 4))
    return VarianceCheck(
        mean=mean,
        mean_se=float(y.std(ddof=1) / math.sqrt(samples)),
        variance=variance,
        variance_se=math.sqrt(max(fourth - variance ** 2, 0.0) / samples),
        bound=weights.beta / 4.0,
    )
