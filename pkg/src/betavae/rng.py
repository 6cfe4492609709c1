"""Seeded random streams.

Backed by numpy's PCG64 bit generator, whose output for a given seed is
fixed across platforms and numpy versions. Child streams are derived with
``SeedSequence.spawn`` so parallel tasks never share state.
"""

from __future__ import annotations

import numpy as np


class Rng:
    def __init__(self, seed: int | np.random.SeedSequence):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self.gen = np.random.Generator(np.random.PCG64(self._seq))

    @property
    def seed(self):
        return self._seq.entropy

    def spawn(self, n: int) -> list["Rng"]:
        return [Rng(s) for s in self._seq.spawn(n)]

    def child(self, *key: int) -> "Rng":
        """Deterministic sub-stream addressed by integer key, independent of draw history."""
        return Rng(np.random.SeedSequence(self._seq.entropy,
                                          spawn_key=tuple(self._seq.spawn_key) + tuple(key)))

    def normal(self, size) -> np.ndarray:
        return self.gen.standard_normal(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        return self.gen.uniform(low, high, size)

    def integers(self, high: int, size=None) -> np.ndarray:
        return self.gen.integers(0, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self.gen.choice(n, size=size, replace=replace)
