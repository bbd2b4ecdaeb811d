"""Property batteries for the cascade, solvers, online algorithms and game.

Each battery returns a ``SuiteResult``: one ``PropertyResult`` per property
with the number of checks made and the first few counterexamples.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from config.settings import TOLERANCE
from services.cascade import (
    cascade_value,
    composed_value,
    exact_influence,
    first_stage,
    sample_batch,
    sample_scenario,
)
from services.classical import expected_triggering_spread
from services.game import (
    PayoffOracle,
    empirical_poa,
    is_nash,
    multiplayer_cascade,
    random_profile,
    sample_multiplayer_scenario,
    social_optimum,
    star_poa_instance,
    verify_utility_conditions,
)
from services.generators import classical_instance, random_game, suite_instance
from services.model import (
    BudgetAllocation,
    BudgetConstraints,
    DirectedGraph,
    InfluenceInstance,
    TriggeringDistribution,
    add_chi,
    add_units,
    lattice_join,
    lattice_le,
    lattice_meet,
    validate_allocation,
    zero_allocation,
)
from services.offline_solver import (
    best_single,
    brute_force_opt,
    density_greedy,
    greedy_partial_enum,
    greedy_trace,
)
from services.online_solver import (
    LightInfluence,
    RestrictedOracle,
    analysis_weights,
    competitive_trials,
    empirical_var_y,
    gen_stream,
    secretary_allocate,
)
from services.oracle import FunctionOracle, InfluenceOracle, ValueOracle, modular_oracle
from utils.seeding import SeedStreams

logger = logging.getLogger(__name__)

MAX_RECORDED_FAILURES = 5
ONLINE_BOUND = 1.0 / (15.0 * math.e)
GREEDY_FLOOR = 0.3
SUITES = ("lattice", "cascade", "solver", "online", "game")


@dataclass
class PropertyResult:
    name: str
    checks: int = 0
    violations: int = 0
    counterexamples: List[Dict] = field(default_factory=list)

    def record(self, ok: bool, **detail):
        self.checks += 1
        if not ok:
            self.violations += 1
            if len(self.counterexamples) < MAX_RECORDED_FAILURES:
                self.counterexamples.append(detail)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> Dict:
        return {
            "passed": self.passed,
            "checks": self.checks,
            "violations": self.violations,
            "counterexamples": self.counterexamples,
        }


@dataclass
class SuiteResult:
    suite: str
    properties: Dict[str, PropertyResult] = field(default_factory=dict)
    wall_time: float = 0.0

    def prop(self, name: str) -> PropertyResult:
        if name not in self.properties:
            self.properties[name] = PropertyResult(name)
        return self.properties[name]

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties.values())

    def to_dict(self) -> Dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "properties": {name: p.to_dict() for name, p in self.properties.items()},
        }


def negated_marginal_oracle(oracle: ValueOracle) -> FunctionOracle:
    """Mutant with every marginal negated: f'(b) = 2 f(0) - f(b)."""
    base = oracle.value(zero_allocation(oracle.n))
    return FunctionOracle(oracle.n, lambda b: 2.0 * base - oracle.value(b), "negated_marginal")


def _random_vector(rng: np.random.Generator, n: int, high: int) -> BudgetAllocation:
    return tuple(int(x) for x in rng.integers(0, high + 1, size=n))


def _rows(values) -> list:
    return [list(v) if isinstance(v, tuple) else v for v in values]


# ---------------------------------------------------------------------------
# Lattice battery
# ---------------------------------------------------------------------------

def check_lattice_properties(oracle: ValueOracle, budget: int, rng: np.random.Generator, pairs: int,
                             suite: SuiteResult, label: str = "exact"):
    """Monotonicity, lattice submodularity and the two marginal bounds on random pairs."""
    n = oracle.n
    f = oracle.value
    for _ in range(pairs):
        x, y = _random_vector(rng, n, budget), _random_vector(rng, n, budget)
        join, meet = lattice_join(x, y), lattice_meet(x, y)
        fx, fy, fj, fm = f(x), f(y), f(join), f(meet)
        where = {"oracle": label, "x": list(x), "y": list(y)}
        suite.prop("lattice_laws").record(
            lattice_join(y, x) == join and lattice_meet(y, x) == meet and lattice_join(x, x) == x
            and lattice_le(meet, x) and lattice_le(x, join),
            **where,
        )
        suite.prop(f"monotone_{label}").record(
            fm <= min(fx, fy) + TOLERANCE and max(fx, fy) <= fj + TOLERANCE, **where, values=[fx, fy, fj, fm]
        )
        suite.prop(f"submodular_{label}").record(fx + fy >= fj + fm - TOLERANCE, **where, values=[fx, fy, fj, fm])
        i = int(rng.integers(n))
        k = int(rng.integers(1, budget + 1))
        low_gain = f(add_chi(meet, i, k)) - fm
        high_gain = f(add_chi(x, i, k)) - fx
        suite.prop(f"weak_diminishing_returns_{label}").record(
            low_gain >= high_gain - TOLERANCE, **where, i=i, k=k, gains=[low_gain, high_gain]
        )
        bound = fx + sum(f(add_chi(x, j, y[j])) - fx for j in range(n) if y[j] > x[j])
        suite.prop(f"join_marginal_bound_{label}").record(fj <= bound + TOLERANCE, **where, join=fj, bound=bound)


def lattice_suite(seed: int, instances: int = 50, pairs: int = 200, mc_instances: int = 5, mc_samples: int = 200,
                  mutate: bool = False) -> SuiteResult:
    suite = SuiteResult("lattice")
    streams = SeedStreams(seed)
    for index in range(instances):
        rng = streams.rng("instances", index)
        instance = suite_instance(rng, max_nodes=6, max_budget=3, max_support=3)
        oracle = InfluenceOracle.exact(instance)
        target = negated_marginal_oracle(oracle) if mutate else oracle
        check_lattice_properties(target, instance.budget, streams.rng("pairs", index), pairs, suite,
                                 "mutant" if mutate else "exact")
    if not mutate:
        for index in range(mc_instances):
            instance = suite_instance(streams.rng("instances", instances + index))
            oracle = InfluenceOracle.monte_carlo(instance, mc_samples, streams.seed("scenario", index))
            check_lattice_properties(oracle, instance.budget, streams.rng("pairs", instances + index),
                                     pairs, suite, "monte_carlo")
    return suite


# ---------------------------------------------------------------------------
# Cascade battery
# ---------------------------------------------------------------------------

def dr_counterexample_instance() -> InfluenceInstance:
    """Node 0 with two out-neighbours that each need a budget of 2.

    f(0) = 0, f(χ_0) = 1, f(2χ_0) = 3: the second unit is worth more than the first.
    """
    graph = DirectedGraph.from_edges(3, [(0, 1), (0, 2)])
    triggering = TriggeringDistribution.edge_categorical(graph, {(0, 1): [(2, 1.0)], (0, 2): [(2, 1.0)]}, 2)
    return InfluenceInstance(graph, triggering, BudgetConstraints.create(2, [2, 2, 2]))


@dataclass(frozen=True)
class DRCounterexample:
    instance: InfluenceInstance
    x: BudgetAllocation
    agent: int
    values: tuple[float, float, float]  # f(x), f(x + χ_i), f(x + 2χ_i)


def find_dr_counterexample(seed: int, attempts: int = 200) -> Optional[DRCounterexample]:
    """Search random instances for f(x+χ_i) - f(x) < f(x+2χ_i) - f(x+χ_i)."""
    streams = SeedStreams(seed)
    for index in range(attempts):
        rng = streams.rng("instances", index)
        instance = suite_instance(rng, max_nodes=5, max_budget=3)
        if instance.budget < 2:
            continue
        oracle = InfluenceOracle.exact(instance)
        x = _random_vector(rng, instance.n, instance.budget - 2)
        i = int(rng.integers(instance.n))
        one, two = add_units(x, i, 1), add_units(x, i, 2)
        values = (oracle.value(x), oracle.value(one), oracle.value(two))
        if values[1] - values[0] < values[2] - values[1] - TOLERANCE:
            logger.info("Diminishing-returns counterexample after %d attempts", index + 1)
            return DRCounterexample(instance, x, i, values)
    return None


def cascade_suite(seed: int, pairs: int = 10_000, classical_instances: int = 20, dr_attempts: int = 200) -> SuiteResult:
    suite = SuiteResult("cascade")
    streams = SeedStreams(seed)
    instance_rng = streams.rng("instances")
    pair_rng = streams.rng("pairs")
    instance = None
    for index in range(pairs):
        if index % 100 == 0:
            instance = suite_instance(instance_rng, max_nodes=12, max_budget=3, max_support=3)
        scenario = sample_scenario(instance, streams.seed("scenario", index))
        x = _random_vector(pair_rng, instance.n, instance.budget)
        y = _random_vector(pair_rng, instance.n, instance.budget)
        where = {"pair": index, "x": list(x), "y": list(y), "thresholds": _rows(scenario.thresholds)}
        suite.prop("step_equals_composition").record(cascade_value(scenario, x) == composed_value(scenario, x), **where)
        gx, gy = first_stage(scenario, x), first_stage(scenario, y)
        suite.prop("first_stage_monotone").record(gx <= first_stage(scenario, lattice_join(x, y)), **where)
        suite.prop("first_stage_coordinate_independent").record(
            first_stage(scenario, lattice_join(x, y)) <= gx | gy, **where
        )

    for index in range(classical_instances):
        rng = streams.rng("classical", index)
        instance, subsets = classical_instance(rng)
        sampled = sample_batch(instance, 50, streams.seed("scenario", pairs + index)).thresholds
        suite.prop("classical_thresholds_binary").record(
            bool(np.isin(sampled, [0, instance.budget + 1]).all()), instance=index
        )
        for b in [zero_allocation(instance.n)] + [_random_vector(rng, instance.n, 1) for _ in range(5)]:
            budgeted = exact_influence(instance, b)
            classical = expected_triggering_spread(instance.graph, subsets, [v for v, x in enumerate(b) if x > 0])
            suite.prop("classical_reduction").record(
                abs(budgeted - classical) <= TOLERANCE, instance=index, b=list(b), values=[budgeted, classical]
            )

    frozen = InfluenceOracle.exact(dr_counterexample_instance())
    values = [frozen.value((k, 0, 0)) for k in range(3)]
    suite.prop("frozen_dr_counterexample").record(values == [0.0, 1.0, 3.0], values=values)
    found = find_dr_counterexample(streams.seed("dr_search"), dr_attempts)
    suite.prop("dr_counterexample_found").record(
        found is not None,
        attempts=dr_attempts,
        **({"x": list(found.x), "agent": found.agent, "values": list(found.values)} if found else {}),
    )
    return suite


# ---------------------------------------------------------------------------
# Solver battery
# ---------------------------------------------------------------------------

def solver_suite(seed: int, instances: int = 30) -> SuiteResult:
    suite = SuiteResult("solver")
    streams = SeedStreams(seed)
    target = 1.0 - 1.0 / math.e
    for index in range(instances):
        instance = suite_instance(streams.rng("instances", index), max_nodes=5, max_budget=4, max_support=3)
        oracle = InfluenceOracle.exact(instance)
        constraints = instance.constraints
        _, opt = brute_force_opt(oracle, constraints)
        trace = greedy_trace(oracle, constraints)
        greedy_value = trace.value
        by_depth = [greedy_partial_enum(oracle, constraints, d) for d in (1, 2, 3)]
        depth_values = [oracle.value(b) for b in by_depth]
        single = best_single(oracle, constraints)
        single_value = oracle.value(single)
        where = {"instance": index, "opt": opt}
        for b in (trace.allocation, by_depth[2], single):
            suite.prop("feasible").record(validate_allocation(b, constraints).feasible, **where, b=list(b))
        suite.prop("greedy_non_decreasing").record(
            all(a <= b + TOLERANCE for a, b in zip(trace.values, trace.values[1:])), **where, values=list(trace.values)
        )
        chain = [greedy_value] + depth_values
        suite.prop("depth_monotone").record(
            all(a <= b + TOLERANCE for a, b in zip(chain, chain[1:])), **where, values=chain
        )
        suite.prop("partial_enum_ratio").record(depth_values[2] >= target * opt - TOLERANCE, **where,
                                                value=depth_values[2])
        suite.prop("greedy_or_single_floor").record(
            max(greedy_value, single_value) >= GREEDY_FLOOR * opt - TOLERANCE, **where,
            greedy=greedy_value, single=single_value,
        )
        suite.prop("density_greedy_matches_trace").record(density_greedy(oracle, constraints) == trace.allocation,
                                                          **where)
    return suite


# ---------------------------------------------------------------------------
# Online battery
# ---------------------------------------------------------------------------

def secretary_success_rate(n: int, trials: int, seed: int) -> float:
    """Fraction of random orders in which the secretary rule picks the unique best agent."""
    oracle = modular_oracle([float(i + 1) for i in range(n)])
    constraints = BudgetConstraints.create(1, [1] * n)
    streams = SeedStreams(seed)
    hits = 0
    best = add_chi(zero_allocation(n), n - 1, 1)
    for t in range(trials):
        stream = gen_stream(n, streams.seed("arrival", t))
        hits += secretary_allocate(stream, RestrictedOracle(oracle), constraints) == best
    return hits / trials


def check_li_decisions(oracle: ValueOracle, algorithm: LightInfluence, suite: SuiteResult, where: Dict):
    """Re-evaluate every logged LI decision against the oracle."""
    budget = algorithm.constraints.budget
    for decision in algorithm.decisions:
        room = min(algorithm.constraints.capacities[decision.agent], budget - sum(decision.before))
        base = oracle.value(decision.before)
        marginals = [oracle.value(add_chi(decision.before, decision.agent, k)) - base for k in range(1, room + 1)]
        logged = len(marginals) == len(decision.marginals) and all(
            abs(a - b) <= TOLERANCE for a, b in zip(marginals, decision.marginals)
        )
        rule = decision.chosen == max((k for k in range(1, room + 1) if decision.accepts(k)), default=0)
        consistent = logged and rule
        suite.prop("li_threshold_consistency").record(
            consistent, **where, agent=decision.agent, chosen=decision.chosen, marginals=marginals,
        )


def online_suite(seed: int, instances: int = 10, trials: int = 2000, variance_draws: int = 10_000,
                 secretary_n: int = 100, secretary_trials: int = 10_000) -> SuiteResult:
    suite = SuiteResult("online")
    streams = SeedStreams(seed)
    for index in range(instances):
        instance = suite_instance(streams.rng("instances", index), max_nodes=5, max_budget=3, max_support=2)
        oracle = InfluenceOracle.exact(instance)
        summary = competitive_trials(instance, trials, streams.seed("trials", index), oracle=oracle)
        where = {"instance": index, "opt": summary.opt_value}
        suite.prop("competitive_ratio").record(
            summary.mean_ratio - 3 * summary.std_error >= ONLINE_BOUND, **where,
            mean=summary.mean_ratio, se=summary.std_error,
        )
        weights = analysis_weights(oracle, instance.constraints, summary.opt_allocation)
        suite.prop("weights_telescope").record(
            abs(math.fsum(weights.weights) - weights.opt_value) <= TOLERANCE, **where, weights=list(weights.weights)
        )
        suite.prop("beta_range").record(-TOLERANCE <= weights.beta <= 1 + TOLERANCE, **where, beta=weights.beta)
        check = empirical_var_y(weights, variance_draws, streams.seed("variance", index))
        suite.prop("variance_bound").record(check.variance <= check.bound + 3 * check.variance_se, **where,
                                            **check.to_dict())
        suite.prop("y_mean").record(abs(check.mean - 0.5) <= 3 * check.mean_se + TOLERANCE, **where,
                                    **check.to_dict())
        for t in range(3):
            stream = gen_stream(instance.n, streams.seed("arrival", index * 3 + t))
            algorithm = LightInfluence(RestrictedOracle(oracle), instance.constraints)
            b = algorithm.run(stream)
            suite.prop("li_feasible").record(validate_allocation(b, instance.constraints).feasible, **where,
                                             b=list(b))
            check_li_decisions(oracle, algorithm, suite, where)
    rate = secretary_success_rate(secretary_n, secretary_trials, streams.seed("secretary"))
    suite.prop("secretary_success").record(rate >= 0.35, n=secretary_n, trials=secretary_trials, rate=rate)
    return suite


# ---------------------------------------------------------------------------
# Game battery
# ---------------------------------------------------------------------------

def check_star(num_leaves: int, suite: SuiteResult, samples: int, seed: int):
    game = star_poa_instance(num_leaves)
    oracle = PayoffOracle(game, samples, seed)
    center = tuple((1,) + (0,) * (game.n - 1) for _ in range(num_leaves))
    payoffs = oracle.payoffs(center)
    expected_payoff = (num_leaves + 1) / num_leaves
    suite.prop("star_payoffs").record(all(abs(p - expected_payoff) <= TOLERANCE for p in payoffs),
                                      payoffs=list(payoffs), expected=expected_payoff)
    verdict = is_nash(oracle, center)
    suite.prop("star_center_is_nash").record(verdict.is_nash, **verdict.to_dict())
    ne_value = oracle.social_value(center)
    suite.prop("star_ne_value").record(abs(ne_value - (num_leaves + 1)) <= TOLERANCE, value=ne_value)
    _, opt_value = social_optimum(oracle)
    suite.prop("star_social_optimum").record(abs(opt_value - 2 * num_leaves) <= TOLERANCE, value=opt_value)
    report = empirical_poa(oracle, starts=2, seed=seed)
    expected_ratio = 2 * num_leaves / (num_leaves + 1)
    suite.prop("star_poa").record(report.ratio is not None and abs(report.ratio - expected_ratio) <= 1e-6,
                                  ratio=report.ratio, expected=expected_ratio)


def game_suite(seed: int, instances: int = 20, profiles: int = 20, starts: int = 3, samples: int = 6,
               star_leaves: int = 5, externality_checks: int = 20, limit: int = 1024) -> SuiteResult:
    suite = SuiteResult("game")
    streams = SeedStreams(seed)
    check_star(star_leaves, suite, 8, streams.seed("star"))
    for index in range(instances):
        rng = streams.rng("instances", index)
        game = random_game(rng)
        oracle = PayoffOracle(game, samples, streams.seed("oracle", index), limit)
        where = {"instance": index, "players": game.num_players, "n": game.n}
        report = verify_utility_conditions(oracle, profiles, streams.seed("profiles", index))
        for name, violations in (("u1", report.u1_violations), ("u2", report.u2_violations),
                                 ("u3", report.u3_violations)):
            suite.prop(f"utility_{name}").record(not violations, **where, violations=violations[:2])
        poa = empirical_poa(oracle, starts, streams.seed("starts", index))
        for profile, value in poa.equilibria:
            suite.prop("poa_at_most_two").record(
                poa.social_opt_value <= 2 * value + 1e-6, **where, profile=_rows(profile),
                ne_value=value, opt_value=poa.social_opt_value,
            )
        base_scenarios = oracle.batch.scenarios()
        for c in range(externality_checks):
            profile = random_profile(game, rng)
            player = int(rng.integers(game.num_players))
            node = int(rng.integers(game.n))
            raised = list(profile)
            raised[player] = add_units(profile[player], node, 1)
            scenario = base_scenarios[int(rng.integers(len(base_scenarios)))]
            mscenario = sample_multiplayer_scenario(game, scenario, streams.seed("externality", index * 1000 + c))
            before = multiplayer_cascade(mscenario, profile).payoffs
            after = multiplayer_cascade(mscenario, raised).payoffs
            suite.prop("negative_externality").record(
                all(after[i] <= before[i] for i in range(game.num_players) if i != player), **where,
                profile=_rows(profile), player=player, node=node, before=list(before), after=list(after),
            )
    return suite


SUITE_RUNNERS: Dict[str, Callable[..., SuiteResult]] = {
    "lattice": lattice_suite,
    "cascade": cascade_suite,
    "solver": solver_suite,
    "online": online_suite,
    "game": game_suite,
}


def run_suites(names: Sequence[str], seed: int, overrides: Optional[Dict[str, Dict]] = None) -> List[SuiteResult]:
    """Run the named batteries (``all`` expands to every battery)."""
    overrides = overrides or {}
    selected = list(SUITES) if "all" in names else list(names)
    results = []
    for name in selected:
        started = time.perf_counter()
        result = SUITE_RUNNERS[name](seed, **overrides.get(name, {}))
        result.wall_time = time.perf_counter() - started
        logger.info("Suite %s: %s in %.1fs", name, "pass" if result.passed else "FAIL", result.wall_time)
        results.append(result)
    return results
