"""Seeded random substreams.

Every random draw in the package goes through a :class:`RandomSeed`.  A seed is
a pair ``(seed, stream_id)``; the generator for that pair depends on nothing
else, so parallel replicates reproduce bit-for-bit whatever the worker count.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_to_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RandomSeed:
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *labels) -> "RandomSeed":
        """Derive a substream by hashing ``labels`` into the stream id."""
        h = hashlib.blake2b(digest_size=8)
        h.update(self.stream_id.to_bytes(8, "little"))
        for label in labels:
            h.update(_label_to_int(label).to_bytes(8, "little"))
        return RandomSeed(self.seed, int.from_bytes(h.digest(), "little"))


def as_seed(seed) -> RandomSeed:
    """Accept a RandomSeed, an int, or None (meaning seed 0)."""
    if isinstance(seed, RandomSeed):
        return seed
    if seed is None:
        return RandomSeed(0)
    return RandomSeed(int(seed))
