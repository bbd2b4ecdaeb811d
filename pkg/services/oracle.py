import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import Callable, Dict, Optional, Protocol, Sequence

from services.cascade import ScenarioBatch, enumerate_batch, hoeffding_half_width, sample_batch
from services.errors import LengthMismatch, SupportTooLarge
from services.model import BudgetAllocation, InfluenceInstance

logger = logging.getLogger(__name__)


class OracleMode(str, Enum):
    EXACT = "exact"
    MONTE_CARLO = "monte_carlo"
    FUNCTION = "function"


class ValueOracle(Protocol):
    """Anything the solvers can query for f(b)."""

    n: int
    query_count: int

    def value(self, b: Sequence[int]) -> float: ...


class CountingOracle(ABC):
    """Value oracle that counts every query and memoises evaluations."""

    mode: OracleMode

    def __init__(self, n: int):
        self.n = n
        self.query_count = 0
        self._cache: Dict[BudgetAllocation, float] = {}

    @abstractmethod
    def _evaluate(self, b: BudgetAllocation) -> float:
        ...

    def value(self, b: Sequence[int]) -> float:
        if len(b) != self.n:
            raise LengthMismatch(f"allocation of length {len(b)} for {self.n} agents")
        self.query_count += 1
        key = tuple(int(x) for x in b)
        cached = self._cache.get(key)
        if cached is None:
            cached = self._evaluate(key)
            self._cache[key] = cached
        return cached

    __call__ = value

    def half_width(self) -> float:
        return 0.0

    def usage_stats(self) -> Dict:
        return {
            "mode": self.mode.value,
            "queries": self.query_count,
            "distinct_allocations": len(self._cache),
        }

    def reset_usage(self):
        self.query_count = 0
        logger.debug("Reset query counter of %s oracle", self.mode.value)


class InfluenceOracle(CountingOracle):
    """f(b) over a frozen scenario set: full enumeration or a fixed sample.

    In Monte Carlo mode the sample is drawn once at construction, so every
    query sees the same scenarios.
    """

    def __init__(self, instance: InfluenceInstance, batch: ScenarioBatch, mode: OracleMode,
                 samples: Optional[int] = None, seed: Optional[int] = None):
        super().__init__(instance.n)
        self.instance = instance
        self.batch = batch
        self.mode = mode
        self.samples = samples
        self.seed = seed

    @classmethod
    def exact(cls, instance: InfluenceInstance, limit: Optional[int] = None) -> "InfluenceOracle":
        return cls(instance, enumerate_batch(instance, limit), OracleMode.EXACT)

    @classmethod
    def monte_carlo(cls, instance: InfluenceInstance, samples: int, seed: int) -> "InfluenceOracle":
        return cls(instance, sample_batch(instance, samples, seed), OracleMode.MONTE_CARLO,
                   samples=samples, seed=seed)

    @classmethod
    def auto(cls, instance: InfluenceInstance, samples: int, seed: int,
             limit: Optional[int] = None) -> "InfluenceOracle":
        """Exact when the scenario space is enumerable, Monte Carlo otherwise."""
        try:
            return cls.exact(instance, limit)
        except SupportTooLarge as exc:
            logger.info("Falling back to Monte Carlo with %d samples: %s", samples, exc)
            return cls.monte_carlo(instance, samples, seed)

    def _evaluate(self, b: BudgetAllocation) -> float:
        return self.batch.expected_value(b)

    def half_width(self) -> float:
        if self.mode is OracleMode.EXACT:
            return 0.0
        return hoeffding_half_width(self.n, self.samples)

    def usage_stats(self) -> Dict:
        stats = super().usage_stats()
        stats["scenarios"] = len(self.batch)
        return stats


class FunctionOracle(CountingOracle):
    """Wraps an arbitrary set function over allocations."""

    mode = OracleMode.FUNCTION

    def __init__(self, n: int, fn: Callable[[BudgetAllocation], float], name: str = "function"):
        super().__init__(n)
        self.fn = fn
        self.name = name

    def _evaluate(self, b: BudgetAllocation) -> float:
        return float(self.fn(b))


def modular_oracle(unit_values: Sequence[float]) -> FunctionOracle:
    """f(b) = Σ_i v_i b_i."""
    values = tuple(unit_values)
    return FunctionOracle(len(values), lambda b: sum(v * x for v, x in zip(values, b)), "modular")
