import logging
from pathlib import Path
from typing import Optional

import click

from commands.context import AppContext, InputError, guarded, pass_app
from config.settings import INSTANCES_DIR
from services.game import star_poa_instance
from services.generators import classical_import_file, gnp_instance, two_node_demo
from services.reporting import RunReport
from utils.storage import instance_digest, save_document

logger = logging.getLogger(__name__)

KINDS = ("gnp", "star_poa", "classical_import", "two_node_demo")


def parse_support(text: Optional[str]):
    """``"0:0.5,2:0.5"`` -> [(0, 0.5), (2, 0.5)]."""
    if not text:
        return None
    support = []
    for item in text.split(","):
        try:
            value, prob = item.split(":")
            support.append((int(value), float(prob)))
        except ValueError as exc:
            raise InputError(f"bad threshold support entry {item!r}; expected value:prob") from exc
    return support


def build(kind: str, seed: int, n: int, p: float, budget: int, capacity: Optional[int], support: Optional[str],
          max_support: int, leaves: int, edge_list: Optional[Path]):
    if kind == "gnp":
        return gnp_instance(n, p, budget, seed, parse_support(support), capacity, max_support)
    if kind == "star_poa":
        return star_poa_instance(leaves)
    if kind == "classical_import":
        if edge_list is None:
            raise InputError("classical_import needs --edge-list")
        return classical_import_file(edge_list, budget, capacity or 1)
    return two_node_demo(budget, (capacity or 1, capacity or 1))


@click.command("gen")
@click.argument("kind", type=click.Choice(KINDS))
@click.option("--n", "n", type=int, default=6, show_default=True, help="Node count (gnp).")
@click.option("--p", "p", type=float, default=0.5, show_default=True, help="Edge probability (gnp).")
@click.option("--budget", type=int, default=2, show_default=True)
@click.option("--capacity", type=int, default=None, help="Per-agent capacity (defaults to B, or 1 for imports).")
@click.option("--support", default=None, help="Threshold support for every edge, e.g. 0:0.5,2:0.5 (gnp).")
@click.option("--max-support", type=int, default=2, show_default=True, help="Random support size bound (gnp).")
@click.option("--leaves", type=int, default=5, show_default=True, help="Star leaves N (star_poa).")
@click.option("--edge-list", type=click.Path(path_type=Path), default=None, help="'u v p' file (classical_import).")
@click.option("--out", "out", type=click.Path(path_type=Path), default=None, help="Instance file to write.")
@pass_app
def gen(app: AppContext, kind, n, p, budget, capacity, support, max_support, leaves, edge_list, out):
    """Generate an instance (or, for star_poa, a game) file."""
    params = {
        "kind": kind, "n": n, "p": p, "budget": budget, "capacity": capacity, "support": support,
        "max_support": max_support, "leaves": leaves, "edge_list": str(edge_list) if edge_list else None,
    }
    report = RunReport("gen", params, seeds={"master": app.seed})
    obj = guarded(lambda: build(kind, app.seed, n, p, budget, capacity, support, max_support, leaves, edge_list))
    path = out or INSTANCES_DIR / f"{kind}_{app.seed}.json"
    report.instance_digest = instance_digest(obj)
    report.results = {"path": str(path), "n": obj.n}
    save_document(obj, path)
    app.emit(report)
