"""Run reports emitted by every CLI command.

Everything except ``timing`` is a deterministic function of the inputs and
seeds, so two runs with the same arguments produce identical reports once
``timing`` is dropped.
"""
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Optional


@dataclass
class RunReport:
    command: str
    params: Dict[str, Any]
    seeds: Dict[str, Any] = field(default_factory=dict)
    instance_digest: Optional[str] = None
    results: Dict[str, Any] = field(default_factory=dict)
    oracle: Dict[str, Any] = field(default_factory=dict)
    started: float = field(default_factory=time.perf_counter, repr=False)
    wall_time: Optional[float] = None

    def finish(self) -> "RunReport":
        self.wall_time = time.perf_counter() - self.started
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "command": self.command,
            "params": self.params,
            "seeds": self.seeds,
            "results": self.results,
        }
        if self.instance_digest is not None:
            data["instance_digest"] = self.instance_digest
        if self.oracle:
            data["oracle"] = self.oracle
        data["timing"] = {"wall_time": self.wall_time}
        return data


def strip_timing(report: Dict[str, Any]) -> Dict[str, Any]:
    """Copy of ``report`` without wall-clock fields."""
    def clean(value):
        if isinstance(value, dict):
            return {k: clean(v) for k, v in value.items() if k not in ("timing", "wall_time")}
        if isinstance(value, list):
            return [clean(v) for v in value]
        return value

    return clean(report)
