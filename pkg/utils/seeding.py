# utils/seeding.py
"""Named seed streams derived from one master seed.

``derive_seed(master, stream, index)`` feeds ``numpy.random.SeedSequence`` with
the master seed as entropy and ``(crc32(stream), index)`` as spawn key, and
returns the first 64-bit word of its state. Each component (scenarios, delays,
tie-breaks, arrivals, coins, ...) therefore gets its own reproducible stream,
independent of how many draws the other components make.
"""
import zlib
from typing import Dict

import numpy as np


def derive_seed(master: int, stream: str, index: int = 0) -> int:
    sequence = np.random.SeedSequence(entropy=int(master), spawn_key=(zlib.crc32(stream.encode()), int(index)))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


class SeedStreams:
    """Hands out derived seeds and remembers which streams were used."""

    def __init__(self, master: int):
        self.master = int(master)
        self.used: Dict[str, int] = {}

    def seed(self, stream: str, index: int = 0) -> int:
        self.used[stream] = max(self.used.get(stream, 0), index + 1)
        return derive_seed(self.master, stream, index)

    def rng(self, stream: str, index: int = 0) -> np.random.Generator:
        return np.random.default_rng(self.seed(stream, index))

    def as_dict(self) -> Dict:
        return {"master": self.master, "streams": dict(sorted(self.used.items()))}
