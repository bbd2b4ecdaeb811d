import json
import logging
from pathlib import Path
from typing import Optional

import click

from commands.context import AppContext, InputError, guarded, pass_app
from services.game import (
    PayoffOracle,
    best_response_dynamics,
    check_profile,
    empirical_poa,
    is_nash,
    verify_utility_conditions,
)
from services.reporting import RunReport
from utils.seeding import SeedStreams
from utils.storage import instance_digest, load_game


def parse_profile(text: Optional[str], game):
    if text is None:
        return game.zero_profile()
    try:
        rows = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"--profile is not valid JSON: {exc}") from exc
    return guarded(lambda: check_profile(game, rows))


@click.command("game")
@click.argument("game_path", type=click.Path(path_type=Path))
@click.option("--profile", default=None, help="Strategy profile as a JSON M x n matrix (default: all zeros).")
@click.option("--best-response", "run_dynamics", is_flag=True, help="Run best-response dynamics from the profile.")
@click.option("--poa", is_flag=True, help="Estimate the price of anarchy.")
@click.option("--verify-utility", is_flag=True, help="Check the utility-game conditions on sampled profiles.")
@click.option("--starts", type=click.IntRange(min=1), default=None, help="Starting profiles for --poa.")
@click.option("--profiles", type=click.IntRange(min=1), default=20, show_default=True,
              help="Sampled profiles for --verify-utility.")
@click.option("--max-iters", type=click.IntRange(min=0), default=None, help="Round cap for the dynamics.")
@click.option("--game-samples", type=click.IntRange(min=1), default=None,
              help="Delay/tie-break draws per threshold scenario.")
@click.pass_context
@pass_app
def game(app: AppContext, ctx: click.Context, game_path, profile, run_dynamics, poa, verify_utility, starts,
         profiles, max_iters, game_samples):
    """Multi-player game: payoffs, best-response dynamics, Nash checks and price of anarchy."""
    starts = starts or app.settings["starts"]
    max_iters = max_iters if max_iters is not None else app.settings["max_iters"]
    game_samples = game_samples or app.settings["game_samples"]
    instance = guarded(lambda: load_game(game_path))
    start = parse_profile(profile, instance)
    streams = SeedStreams(app.seed)
    report = RunReport("game", {
        "game": str(game_path), "profile": [list(row) for row in start], "best_response": run_dynamics,
        "poa": poa, "verify_utility": verify_utility, "starts": starts, "profiles": profiles,
        "max_iters": max_iters, "game_samples": game_samples,
    })
    report.instance_digest = instance_digest(instance)
    oracle = PayoffOracle(instance, game_samples, streams.seed("game"))
    results = {
        "payoffs": list(oracle.payoffs(start)),
        "social_value": oracle.social_value(start),
        "nash": guarded(lambda: is_nash(oracle, start)).to_dict(),
    }
    if run_dynamics:
        dynamics = guarded(lambda: best_response_dynamics(oracle, start, max_iters))
        results["dynamics"] = dynamics.to_dict()
        results["dynamics"]["payoffs"] = list(oracle.payoffs(dynamics.profile))
        results["dynamics"]["is_nash"] = is_nash(oracle, dynamics.profile).is_nash
    utility = None
    if verify_utility:
        utility = verify_utility_conditions(oracle, profiles, streams.seed("profiles"))
        results["utility"] = utility.to_dict()
    if poa:
        results["poa"] = guarded(lambda: empirical_poa(oracle, starts, streams.seed("starts"), max_iters)).to_dict()
    report.results = results
    report.seeds = streams.as_dict()
    report.oracle = oracle.usage_stats()
    app.emit(report)
    if utility is not None and not utility.passed:
        ctx.exit(1)
