import logging
from typing import Dict, Optional

import click

from commands.context import AppContext, pass_app
from services.reporting import RunReport
from services.verification import SUITES, run_suites

logger = logging.getLogger(__name__)


def suite_overrides(instances: Optional[int], pairs: Optional[int], trials: Optional[int],
                    mutant: bool) -> Dict[str, Dict]:
    """Per-battery keyword overrides from the shared CLI knobs."""
    overrides: Dict[str, Dict] = {name: {} for name in SUITES}
    if instances is not None:
        for name in ("lattice", "solver", "online", "game"):
            overrides[name]["instances"] = instances
        overrides["cascade"]["classical_instances"] = instances
    if pairs is not None:
        overrides["lattice"]["pairs"] = pairs
        overrides["cascade"]["pairs"] = pairs
    if trials is not None:
        overrides["online"]["trials"] = trials
    if mutant:
        overrides["lattice"]["mutate"] = True
    return overrides


@click.command("verify")
@click.argument("suites", nargs=-1, type=click.Choice(SUITES + ("all",)))
@click.option("--instances", type=click.IntRange(min=1), default=None, help="Random instances per battery.")
@click.option("--pairs", type=click.IntRange(min=1), default=None, help="Random vector pairs per instance.")
@click.option("--trials", type=click.IntRange(min=1), default=None, help="Online trials per instance.")
@click.option("--inject-mutant", is_flag=True, help="Check a negated-marginal oracle instead (must fail).")
@click.pass_context
@pass_app
def verify(app: AppContext, ctx: click.Context, suites, instances, pairs, trials, inject_mutant):
    """Run property batteries; exits 1 when any property is violated."""
    names = list(suites) or ["all"]
    if inject_mutant and "all" not in names and "lattice" not in names:
        names.append("lattice")
    report = RunReport("verify", {"suites": names, "instances": instances, "pairs": pairs, "trials": trials,
                                  "inject_mutant": inject_mutant}, seeds={"master": app.seed})
    results = run_suites(names, app.seed, suite_overrides(instances, pairs, trials, inject_mutant))
    passed = all(r.passed for r in results)
    report.results = {"passed": passed, "suites": [r.to_dict() for r in results]}
    app.emit(report)
    if not passed:
        ctx.exit(1)
