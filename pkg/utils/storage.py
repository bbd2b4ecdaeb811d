# utils/storage.py
"""JSON persistence for instances, games, reports and experiment settings."""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

from config.schema import EXPERIMENT_SCHEMA, GAME_SCHEMA, INSTANCE_SCHEMA
from config.settings import (
    DEFAULT_ALPHA,
    DEFAULT_ENUM_DEPTH,
    DEFAULT_GAME_SAMPLES,
    DEFAULT_MAX_ITERS,
    DEFAULT_P_SECRETARY,
    DEFAULT_SAMPLES,
    DEFAULT_STARTS,
    DEFAULT_TRIALS,
    EXPERIMENT_FILE,
)
from services.errors import InstanceError
from services.game import DelayKind, DelaySpec, GameInstance
from services.model import (
    BudgetConstraints,
    DirectedGraph,
    InfluenceInstance,
    TriggeringDistribution,
    TriggeringKind,
)
from utils.validation import validate_document

logger = logging.getLogger(__name__)

DEFAULT_EXPERIMENT = {
    "alpha": DEFAULT_ALPHA,
    "p_secretary": DEFAULT_P_SECRETARY,
    "trials": DEFAULT_TRIALS,
    "samples": DEFAULT_SAMPLES,
    "game_samples": DEFAULT_GAME_SAMPLES,
    "starts": DEFAULT_STARTS,
    "max_iters": DEFAULT_MAX_ITERS,
    "enum_depth": DEFAULT_ENUM_DEPTH,
}


def load_experiment_settings(path: Union[str, Path] = EXPERIMENT_FILE) -> Dict:
    """Experiment defaults from ``path``; missing keys or an unusable file fall back to built-ins."""
    settings = dict(DEFAULT_EXPERIMENT)
    path = Path(path)
    if not path.exists():
        logger.info("No experiment file at %s, using built-in defaults", path)
        return settings
    try:
        data = json.loads(path.read_text())
        validate_document(data, EXPERIMENT_SCHEMA, str(path))
    except (json.JSONDecodeError, InstanceError) as exc:
        logger.warning("Ignoring experiment file %s: %s", path, exc)
        return settings
    settings.update(data)
    return settings


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

def _resolver(n: int, names: Optional[Sequence[str]]):
    index = {}
    if names is not None:
        if len(names) != n:
            raise InstanceError(f"names lists {len(names)} entries for n={n}")
        if len(set(names)) != n:
            raise InstanceError("node names must be unique")
        index = {name: i for i, name in enumerate(names)}

    def resolve(endpoint: Union[int, str]) -> int:
        if isinstance(endpoint, str):
            if endpoint not in index:
                raise InstanceError(f"unknown node name {endpoint!r}")
            return index[endpoint]
        if not 0 <= endpoint < n:
            raise InstanceError(f"node {endpoint} outside 0..{n - 1}")
        return endpoint

    return resolve


def _triggering_from_dict(spec: Dict, graph: DirectedGraph, budget: int, resolve) -> TriggeringDistribution:
    kind = TriggeringKind(spec["kind"])
    if kind is TriggeringKind.EDGE_CATEGORICAL:
        supports = {}
        for entry in spec["edges"]:
            edge = (resolve(entry["from"]), resolve(entry["to"]))
            if edge in supports:
                raise InstanceError(f"duplicate threshold spec for edge {edge[0]}->{edge[1]}")
            supports[edge] = [(item["value"], item["prob"]) for item in entry["support"]]
        return TriggeringDistribution.edge_categorical(graph, supports, budget)
    per_node = {}
    for entry in spec["nodes"]:
        v = resolve(entry["node"])
        if v in per_node:
            raise InstanceError(f"duplicate threshold spec for node {v}")
        if kind is TriggeringKind.NODE_MIXTURE:
            per_node[v] = [(item["prob"], tuple(item["thresholds"])) for item in entry["mixture"]]
        else:
            per_node[v] = [(item["prob"], [resolve(u) for u in item["members"]]) for item in entry["subsets"]]
    if kind is TriggeringKind.NODE_MIXTURE:
        return TriggeringDistribution.node_mixture(graph, per_node, budget)
    return TriggeringDistribution.classical(graph, per_node, budget)


def instance_from_dict(data: Dict, source: str = "instance") -> InfluenceInstance:
    validate_document(data, INSTANCE_SCHEMA if "players" not in data else GAME_SCHEMA, source)
    n = data["n"]
    names = data.get("names")
    resolve = _resolver(n, names)
    graph = DirectedGraph.from_edges(n, [(resolve(e["from"]), resolve(e["to"])) for e in data["edges"]])
    constraints = BudgetConstraints.create(data["budget"], data["capacities"])
    triggering = _triggering_from_dict(data["triggering"], graph, data["budget"], resolve)
    return InfluenceInstance(graph, triggering, constraints, tuple(names) if names is not None else None)


def _triggering_to_dict(instance: InfluenceInstance) -> Dict:
    graph, triggering = instance.graph, instance.triggering
    if triggering.kind is TriggeringKind.EDGE_CATEGORICAL:
        return {
            "kind": triggering.kind.value,
            "edges": [
                {"from": u, "to": v, "support": [{"value": t, "prob": p} for t, p in support]}
                for (u, v), support in zip(graph.edges, triggering.edge_supports)
            ],
        }
    nodes = [v for v in range(graph.n) if graph.in_neighbors[v]]
    if triggering.kind is TriggeringKind.NODE_MIXTURE:
        return {
            "kind": triggering.kind.value,
            "nodes": [
                {"node": v, "mixture": [{"prob": p, "thresholds": list(vec)} for p, vec in triggering.node_supports[v]]}
                for v in nodes
            ],
        }
    return {
        "kind": triggering.kind.value,
        "nodes": [
            {"node": v, "subsets": [{"prob": p, "members": sorted(m)} for p, m in triggering.subset_supports[v]]}
            for v in nodes
        ],
    }


def instance_to_dict(instance: InfluenceInstance) -> Dict:
    data: Dict[str, Any] = {"n": instance.n}
    if instance.names is not None:
        data["names"] = list(instance.names)
    data["edges"] = [{"from": u, "to": v} for u, v in instance.graph.edges]
    data["budget"] = instance.budget
    data["capacities"] = list(instance.constraints.capacities)
    data["triggering"] = _triggering_to_dict(instance)
    return data


# ---------------------------------------------------------------------------
# Games
# ---------------------------------------------------------------------------

def game_from_dict(data: Dict, source: str = "game") -> GameInstance:
    validate_document(data, GAME_SCHEMA, source)
    base = instance_from_dict(data, source)
    players = tuple(BudgetConstraints.create(p["budget"], p["capacities"]) for p in data["players"])
    delay_spec = data.get("delay", {"kind": DelayKind.EXPONENTIAL.value})
    kind = DelayKind(delay_spec["kind"])
    if kind is DelayKind.EXPONENTIAL:
        delay = DelaySpec(kind, rate=delay_spec.get("rate", 1.0))
    else:
        delay = DelaySpec(kind, low=delay_spec["low"], high=delay_spec["high"])
    return GameInstance(base, players, delay)


def game_to_dict(game: GameInstance) -> Dict:
    data = instance_to_dict(game.base)
    data["players"] = [{"budget": p.budget, "capacities": list(p.capacities)} for p in game.players]
    data["delay"] = game.delay.to_dict()
    return data


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def _read_json(path: Union[str, Path]) -> Dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: not valid JSON ({exc})") from exc


def load_instance(path: Union[str, Path]) -> InfluenceInstance:
    return instance_from_dict(_read_json(path), str(path))


def load_game(path: Union[str, Path]) -> GameInstance:
    return game_from_dict(_read_json(path), str(path))


def is_game_file(path: Union[str, Path]) -> bool:
    return "players" in _read_json(path)


def to_document(obj: Union[InfluenceInstance, GameInstance]) -> Dict:
    return game_to_dict(obj) if isinstance(obj, GameInstance) else instance_to_dict(obj)


def save_document(obj: Union[InfluenceInstance, GameInstance], path: Union[str, Path]) -> str:
    """Write an instance or game as JSON and return the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_document(obj), indent=2) + "\n")
    logger.info("Saved %s to %s", type(obj).__name__, path)
    return str(path)


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def instance_digest(obj: Union[InfluenceInstance, GameInstance]) -> str:
    """sha256 of the canonical JSON form."""
    return hashlib.sha256(canonical_json(to_document(obj)).encode()).hexdigest()


def dump_report(report: Dict, output: Optional[Union[str, Path]] = None) -> str:
    """Serialise ``report``; also write it to ``output`` when given."""
    text = json.dumps(report, indent=2, sort_keys=True)
    if output is not None:
        path = Path(output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n")
    return text
