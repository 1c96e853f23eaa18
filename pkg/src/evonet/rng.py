"""Reproducible random streams.

Every replica gets its own Philox-4x64-10 stream keyed by
``seed + (replica << 64)`` with the counter starting at zero, so a replica
can be regenerated on its own and in any order.
"""
from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "philox4x64-10"
_MASK64 = (1 << 64) - 1


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    if seed < 0 or replica < 0:
        raise ValueError("seed and replica must be non-negative")
    key = (int(seed) & _MASK64) | (int(replica) << 64)
    return np.random.Generator(np.random.Philox(key=key))


class UniformStream:
    """Buffered uniforms for tight Python loops."""

    __slots__ = ("gen", "_buf", "_i", "_block")

    def __init__(self, gen: np.random.Generator, block: int = 1 << 16):
        self.gen = gen
        self._block = block
        self._buf = gen.random(block).tolist()
        self._i = 0

    def random(self) -> float:
        i = self._i
        if i == self._block:
            self._buf = self.gen.random(self._block).tolist()
            i = 0
        self._i = i + 1
        return self._buf[i]

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        return int(self.random() * n)
