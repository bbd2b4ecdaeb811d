import logging
from pathlib import Path

import click

from commands.context import AppContext, guarded, pass_app
from services.online_solver import ExploreMode, competitive_trials, theoretical_bound
from services.oracle import InfluenceOracle, OracleMode
from services.reporting import RunReport
from utils.seeding import SeedStreams
from utils.storage import instance_digest, load_instance

logger = logging.getLogger(__name__)


@click.command("online")
@click.argument("instance_path", type=click.Path(path_type=Path))
@click.option("--trials", type=click.IntRange(min=1), default=None, help="Independent arrival orders.")
@click.option("--alpha", type=float, default=None, help="Light Influence threshold factor.")
@click.option("--p-secretary", type=click.FloatRange(0, 1), default=None, help="Probability of the secretary branch.")
@click.option("--explore-solver", "--explore", "explore_solver", type=click.Choice([m.value for m in ExploreMode]),
              default=ExploreMode.BRUTE.value,
              show_default=True, help="Solver for f(b^L).")
@click.option("--records/--no-records", default=False, help="Include every trial in the report.")
@pass_app
def online(app: AppContext, instance_path, trials, alpha, p_secretary, explore_solver, records):
    """Competitive ratio of the randomized online allocation over random arrival orders."""
    trials = trials or app.settings["trials"]
    alpha = alpha if alpha is not None else app.settings["alpha"]
    p_secretary = p_secretary if p_secretary is not None else app.settings["p_secretary"]
    instance = guarded(lambda: load_instance(instance_path))
    streams = SeedStreams(app.seed)
    report = RunReport("online", {"instance": str(instance_path), "trials": trials, "alpha": alpha,
                                  "p_secretary": p_secretary, "explore_solver": explore_solver})
    report.instance_digest = instance_digest(instance)
    oracle = InfluenceOracle.auto(instance, app.samples, streams.seed("scenario"), app.limit)
    summary = guarded(lambda: competitive_trials(instance, trials, streams.seed("trials"), alpha, p_secretary,
                                                 ExploreMode(explore_solver), oracle))
    results = summary.to_dict()
    if not records:
        results.pop("trials")
    results["exact"] = oracle.mode is OracleMode.EXACT
    results["bound_check"] = {
        "bound": theoretical_bound(summary.beta),
        "mean_minus_3se": summary.mean_ratio - 3 * summary.std_error,
    }
    report.results = results
    report.seeds = streams.as_dict()
    report.oracle = oracle.usage_stats()
    app.emit(report)
