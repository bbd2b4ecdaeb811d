import logging
from pathlib import Path

import click

from commands.context import AppContext, guarded, pass_app
from config.settings import SEARCH_LIMIT, TOLERANCE
from services.offline_solver import SolverConfig, SolverMode, brute_force_opt, solve
from services.oracle import InfluenceOracle, OracleMode
from services.reporting import RunReport
from utils.seeding import SeedStreams
from utils.storage import instance_digest, load_instance

logger = logging.getLogger(__name__)

MODES = {"brute": SolverMode.BRUTE_FORCE, "greedy": SolverMode.GREEDY, "enum": SolverMode.GREEDY_PARTIAL_ENUM}


@click.command("solve")
@click.argument("instance_path", type=click.Path(path_type=Path))
@click.option("--mode", type=click.Choice(list(MODES)), default="enum", show_default=True)
@click.option("--depth", type=click.IntRange(1, 3), default=None, help="Partial-enumeration depth.")
@pass_app
def solve_command(app: AppContext, instance_path, mode, depth):
    """Maximise expected influence offline and report the allocation."""
    depth = depth or app.settings["enum_depth"]
    instance = guarded(lambda: load_instance(instance_path))
    streams = SeedStreams(app.seed)
    report = RunReport("solve", {"instance": str(instance_path), "mode": mode, "depth": depth,
                                 "samples": app.samples, "limit": app.limit})
    report.instance_digest = instance_digest(instance)
    oracle = InfluenceOracle.auto(instance, app.samples, streams.seed("scenario"), app.limit)
    config = SolverConfig(MODES[mode], depth)
    result = guarded(lambda: solve(oracle, instance.constraints, config))
    results = result.report()
    if oracle.mode is OracleMode.MONTE_CARLO:
        results["ci_half_width"] = oracle.half_width()
    results["exact"] = oracle.mode is OracleMode.EXACT
    if instance.constraints.search_space_size <= SEARCH_LIMIT:
        opt_allocation, opt_value = brute_force_opt(oracle, instance.constraints)
        results["brute_force"] = {"allocation": list(opt_allocation), "value": opt_value}
        results["ratio"] = result.value / opt_value if opt_value > TOLERANCE else 1.0
    report.results = results
    report.seeds = streams.as_dict()
    report.oracle = oracle.usage_stats()
    app.emit(report)
