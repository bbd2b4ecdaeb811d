import numpy as np
import pytest

from services.cascade import cascade_value, enumerate_batch
from services.errors import InstanceError, LengthMismatch
from services.game import (
    DelayKind,
    DelaySpec,
    DynamicsStatus,
    GameInstance,
    MultiplayerScenario,
    PayoffOracle,
    best_response,
    best_response_dynamics,
    check_profile,
    empirical_poa,
    expected_payoffs,
    herd_profile,
    is_nash,
    joined_allocation,
    multiplayer_cascade,
    sample_multiplayer_scenario,
    social_optimum,
    star_poa_instance,
    verify_utility_conditions,
)
from services.generators import random_game
from services.model import BudgetConstraints, DirectedGraph, InfluenceInstance, TriggeringDistribution


def on_node(n, node):
    return tuple(1 if v == node else 0 for v in range(n))


@pytest.fixture(scope="module")
def star():
    return star_poa_instance(5)


@pytest.fixture(scope="module")
def star_oracle(star):
    return PayoffOracle(star, samples=8, seed=0)


@pytest.fixture
def star_center(star):
    return tuple(on_node(star.n, 0) for _ in range(star.num_players))


@pytest.fixture
def isolated_duel():
    """One isolated node and two players who may each bid up to 2."""
    graph = DirectedGraph.from_edges(1, [])
    base = InfluenceInstance(graph, TriggeringDistribution.edge_categorical(graph, {}, 2),
                             BudgetConstraints.create(2, [2]))
    return GameInstance(base, (base.constraints, base.constraints))


@pytest.fixture
def demo_game(demo_instance):
    return GameInstance(demo_instance, (demo_instance.constraints,))


class TestGameInstance:
    def test_star_shape(self):
        game = star_poa_instance(1)
        assert game.n == 3
        assert game.num_players == 1

    def test_player_budget_bounded(self, demo_instance):
        with pytest.raises(InstanceError):
            GameInstance(demo_instance, (BudgetConstraints.create(3, [1, 1]),))

    def test_needs_a_player(self, demo_instance):
        with pytest.raises(InstanceError):
            GameInstance(demo_instance, ())

    def test_check_profile(self, demo_game):
        assert check_profile(demo_game, [[1, 0]]) == ((1, 0),)
        with pytest.raises(LengthMismatch):
            check_profile(demo_game, [[1, 0], [0, 1]])
        with pytest.raises(InstanceError):
            check_profile(demo_game, [[1, 1]])

    def test_delays_positive_and_distinct(self):
        delays = DelaySpec(DelayKind.UNIFORM, low=0.0, high=1.0).sample(np.random.default_rng(0), 50)
        assert (delays > 0).all()
        assert len(set(delays)) == 50

    def test_bad_delay_spec(self):
        with pytest.raises(InstanceError):
            DelaySpec(DelayKind.EXPONENTIAL, rate=0)


class TestMultiplayerCascade:
    def test_higher_bid_wins(self, isolated_duel):
        scenario = enumerate_batch(isolated_duel.base).scenario(0)
        mscenario = MultiplayerScenario(scenario, (), ((1, 0),))
        assert multiplayer_cascade(mscenario, ((2,), (1,))).payoffs == (1, 0)

    def test_uniform_tie_break(self, isolated_duel):
        scenario = enumerate_batch(isolated_duel.base).scenario(0)
        wins = 0
        for seed in range(10_000):
            mscenario = sample_multiplayer_scenario(isolated_duel, scenario, seed)
            wins += multiplayer_cascade(mscenario, ((1,), (1,))).payoffs[0]
        assert abs(wins / 10_000 - 0.5) <= 0.02

    @pytest.mark.parametrize("order, winner", [((0, 1), 0), ((1, 0), 1)])
    def test_simultaneous_arrivals_follow_priority(self, point_mass, order, winner):
        instance = point_mass(3, [(0, 2), (1, 2)], [1, 1], 1, [1, 1, 1])
        scenario = enumerate_batch(instance).scenario(0)
        mscenario = MultiplayerScenario(scenario, (1.0, 1.0), ((0, 1), (0, 1), order))
        outcome = multiplayer_cascade(mscenario, ((1, 0, 0), (0, 1, 0)))
        assert outcome.colors[2] == winner
        assert outcome.times[2] == 1.0

    def test_single_player_matches_cascade(self, demo_game):
        batch = enumerate_batch(demo_game.base)
        for s in range(len(batch)):
            mscenario = sample_multiplayer_scenario(demo_game, batch.scenario(s), s)
            outcome = multiplayer_cascade(mscenario, ((1, 0),))
            assert outcome.payoffs[0] == cascade_value(batch.scenario(s), (1, 0))

    def test_colors_and_conservation_on_random_games(self):
        rng = np.random.default_rng(1)
        for index in range(10):
            game = random_game(rng)
            batch = enumerate_batch(game.base)
            profile = tuple(
                tuple(int(x) for x in rng.integers(0, 2, size=game.n)) for _ in range(game.num_players)
            )
            mscenario = sample_multiplayer_scenario(game, batch.scenario(0), index)
            outcome = multiplayer_cascade(mscenario, profile)
            assert sum(outcome.payoffs) == cascade_value(batch.scenario(0), joined_allocation(profile))
            for v, color in enumerate(outcome.colors):
                if color is not None and outcome.times[v] == 0.0:
                    assert profile[color][v] == joined_allocation(profile)[v] > 0


class TestPayoffs:
    def test_empty_profile(self, star):
        assert expected_payoffs(star, star.zero_profile()) == (0.0,) * star.num_players

    def test_single_player_equals_influence(self, demo_game):
        oracle = PayoffOracle(demo_game, samples=4, seed=3)
        assert oracle.payoffs(((1, 0),)) == (pytest.approx(1.5),)

    def test_star_center_payoffs(self, star_oracle, star_center):
        for payoff in star_oracle.payoffs(star_center):
            assert payoff == pytest.approx(6 / 5, abs=1e-12)
        assert star_oracle.social_value(star_center) == 6.0

    def test_social_value_is_sum_of_payoffs(self, star_oracle, star):
        profile = tuple(on_node(star.n, v) for v in (0, 0, 1, 6, 6))
        assert sum(star_oracle.payoffs(profile)) == pytest.approx(star_oracle.social_value(profile))

    def test_payoffs_are_memoised(self, star, star_center):
        oracle = PayoffOracle(star, samples=8, seed=1)
        oracle.payoffs(star_center)
        oracle.payoffs(star_center)
        assert oracle.usage_stats()["queries"] == 2
        assert oracle.usage_stats()["distinct_profiles"] == 1
        assert oracle.draws == 10


class TestBestResponse:
    def test_single_player_is_optimum(self, demo_game):
        oracle = PayoffOracle(demo_game, samples=4, seed=0)
        row, value = best_response(oracle, 0, demo_game.zero_profile())
        assert row == (1, 0)
        assert value == pytest.approx(1.5)

    def test_center_stays_best(self, star_oracle, star_center):
        row, value = best_response(star_oracle, 0, star_center)
        assert row == on_node(11, 0)
        assert value == pytest.approx(6 / 5)

    def test_zero_budget_player(self, demo_instance):
        game = GameInstance(demo_instance, (demo_instance.constraints, BudgetConstraints.create(0, [0, 0])))
        oracle = PayoffOracle(game, samples=4, seed=0)
        row, _ = best_response(oracle, 1, game.zero_profile())
        assert row == (0, 0)


class TestDynamics:
    def test_single_player_converges(self, demo_game):
        oracle = PayoffOracle(demo_game, samples=4, seed=0)
        report = best_response_dynamics(oracle, demo_game.zero_profile(), 10)
        assert report.status is DynamicsStatus.CONVERGED
        assert report.moves == 1
        assert report.profile == ((1, 0),)

    def test_star_center_is_stable(self, star_oracle, star_center):
        report = best_response_dynamics(star_oracle, star_center, 10)
        assert report.status is DynamicsStatus.CONVERGED
        assert report.moves == 0

    def test_zero_cap_is_undecided(self, star_oracle, star_center):
        assert best_response_dynamics(star_oracle, star_center, 0).status is DynamicsStatus.UNDECIDED


class TestNash:
    def test_single_player_optimum(self, demo_game):
        oracle = PayoffOracle(demo_game, samples=4, seed=0)
        assert is_nash(oracle, ((1, 0),)).is_nash

    def test_star_center(self, star_oracle, star_center):
        assert is_nash(star_oracle, star_center).is_nash

    def test_player_on_leaf_deviates(self, star_oracle, star):
        profile = (on_node(star.n, 1),) + tuple(on_node(star.n, 0) for _ in range(4))
        verdict = is_nash(star_oracle, profile)
        assert not verdict.is_nash
        assert verdict.deviations[0].gain > 0


class TestStarPriceOfAnarchy:
    def test_social_values(self, star_oracle, star_center, star):
        spread = (on_node(star.n, 0),) + tuple(on_node(star.n, v) for v in range(6, 10))
        assert star_oracle.social_value(star_center) == 6.0
        assert star_oracle.social_value(spread) == 10.0

    def test_social_optimum(self, star_oracle):
        _, value = social_optimum(star_oracle)
        assert value == 10.0

    def test_herd_profile_is_all_center(self, star_oracle, star_center):
        assert herd_profile(star_oracle) == star_center

    def test_ratio(self, star_oracle):
        report = empirical_poa(star_oracle, starts=2, seed=0)
        assert report.ratio == pytest.approx(10 / 6)
        assert report.worst_ne_value == 6.0

    def test_single_player_ratio_is_one(self, demo_game):
        report = empirical_poa(PayoffOracle(demo_game, samples=4, seed=0), starts=3, seed=1)
        assert report.ratio == pytest.approx(1.0)


class TestUtilityConditions:
    def test_star(self, star_oracle):
        assert verify_utility_conditions(star_oracle, 10, seed=0).passed

    def test_single_player(self, demo_game):
        report = verify_utility_conditions(PayoffOracle(demo_game, samples=4, seed=0), 10, seed=1)
        assert report.passed
        assert report.profiles_checked == 10

    def test_pairs_drawn_independently_of_profiles(self, star_oracle):
        single = verify_utility_conditions(star_oracle, 1, seed=2, pairs=6)
        assert single.profiles_checked == 1
        assert single.pairs_checked == 6
        assert single.passed

    def test_random_games(self):
        rng = np.random.default_rng(17)
        for index in range(5):
            oracle = PayoffOracle(random_game(rng), samples=6, seed=index, limit=1024)
            report = verify_utility_conditions(oracle, 8, seed=index)
            assert report.passed, report.to_dict()
            poa = empirical_poa(oracle, starts=3, seed=index)
            for _, value in poa.equilibria:
                assert poa.social_opt_value <= 2 * value + 1e-6
