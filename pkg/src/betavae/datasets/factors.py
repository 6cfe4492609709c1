"""Ground-truth factor grids and factor-conditioned sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rng import Rng


class FactorError(ValueError):
    """Invalid factor name, index or tuple."""


@dataclass(frozen=True)
class FactorSpace:
    """Ordered factor grid. Flat indices use mixed radix with the last factor fastest.

    ``excluded`` names stay part of the grid (they are still randomized when
    sampling) but are never held fixed and never used as labels.
    """

    factors: tuple[tuple[str, int], ...]
    image_shape: tuple[int, int, int] = (1, 64, 64)
    excluded: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple((str(n), int(c)) for n, c in self.factors))
        object.__setattr__(self, "image_shape", tuple(int(s) for s in self.image_shape))
        object.__setattr__(self, "excluded", frozenset(self.excluded))
        if len(self.factors) < 2:
            raise FactorError("a factor space needs at least two factors")
        if any(c < 1 for _, c in self.factors):
            raise FactorError(f"cardinalities must be positive: {self.factors}")
        names = [n for n, _ in self.factors]
        if len(set(names)) != len(names):
            raise FactorError(f"duplicate factor names: {names}")
        unknown = self.excluded - set(names)
        if unknown:
            raise FactorError(f"unknown factor(s) {sorted(unknown)}")

    @property
    def all_names(self) -> list[str]:
        return [n for n, _ in self.factors]

    @property
    def cardinalities(self) -> np.ndarray:
        return np.array([c for _, c in self.factors], dtype=np.int64)

    @property
    def sampleable(self) -> list[int]:
        """Grid positions of the factors that can be held fixed."""
        return [i for i, (n, _) in enumerate(self.factors) if n not in self.excluded]

    @property
    def names(self) -> list[str]:
        return [self.factors[i][0] for i in self.sampleable]

    @property
    def K(self) -> int:
        return len(self.sampleable)

    @property
    def size(self) -> int:
        return int(np.prod(self.cardinalities))

    @property
    def strides(self) -> np.ndarray:
        card = self.cardinalities
        strides = np.ones_like(card)
        strides[:-1] = np.cumprod(card[::-1])[::-1][1:]
        return strides

    def index_of(self, name: str) -> int:
        try:
            return self.all_names.index(name)
        except ValueError:
            raise FactorError(f"unknown factor {name!r}; known: {self.all_names}")

    def check(self, tuples) -> np.ndarray:
        t = np.asarray(tuples, dtype=np.int64)
        if t.shape[-1] != len(self.factors):
            raise FactorError(f"factor tuple length {t.shape[-1]} != {len(self.factors)}")
        if np.any(t < 0) or np.any(t >= self.cardinalities):
            raise FactorError(f"factor index out of range for cardinalities {self.cardinalities.tolist()}")
        return t

    def encode(self, tuples) -> np.ndarray:
        return self.check(tuples) @ self.strides

    def decode(self, flat) -> np.ndarray:
        flat = np.asarray(flat, dtype=np.int64)
        if np.any(flat < 0) or np.any(flat >= self.size):
            raise FactorError(f"flat index out of range [0, {self.size})")
        return (flat[..., None] // self.strides) % self.cardinalities

    def median_tuple(self) -> np.ndarray:
        """Per-factor median index (lower median for even cardinalities)."""
        return (self.cardinalities - 1) // 2


SHAPES2D_FACTORS = (("shape", 3), ("scale", 6), ("rotation", 40), ("posX", 32), ("posY", 32))


def shapes2d_space() -> FactorSpace:
    return FactorSpace(SHAPES2D_FACTORS, (1, 64, 64))


def exclude_factor(space: FactorSpace, name: str) -> FactorSpace:
    space.index_of(name)
    return FactorSpace(space.factors, space.image_shape, space.excluded | {name})


def sample_tuples(space: FactorSpace, n: int, rng: Rng) -> np.ndarray:
    card = space.cardinalities
    return rng.gen.integers(0, card, size=(n, len(card)))


def sample_pairs(space: FactorSpace, y: int, n: int, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    """n pairs of uniform factor tuples that agree on sampleable factor y."""
    if not 0 <= y < space.K:
        raise FactorError(f"factor label {y} outside [0, {space.K})")
    col = space.sampleable[y]
    card = space.cardinalities
    draws = rng.gen.integers(0, card, size=(2, n, len(card)))
    v1, v2 = draws[0], draws[1]
    v2[:, col] = v1[:, col]
    return v1, v2


def sample_pair_fixed_factor(space: FactorSpace, y: int, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    v1, v2 = sample_pairs(space, y, 1, rng)
    return v1[0], v2[0]
