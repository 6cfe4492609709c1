"""Non-image datasets used to build oracle encoders for the metric."""

from __future__ import annotations

import numpy as np

from .factors import FactorSpace


class FactorCodeDataset:
    """Each "image" is the concatenated one-hot codes of each factor value.

    Any encoder that reads these codes sees the ground truth directly, which
    makes exact expected metric scores derivable by hand.
    """

    def __init__(self, space: FactorSpace):
        self.space = space
        self.offsets = np.concatenate([[0], np.cumsum(space.cardinalities)[:-1]])
        self.width = int(space.cardinalities.sum())

    def with_space(self, space: FactorSpace) -> "FactorCodeDataset":
        return FactorCodeDataset(space)

    def __len__(self) -> int:
        return self.space.size

    @property
    def image_shape(self) -> tuple:
        return (self.width,)

    def images(self, tuples) -> np.ndarray:
        t = self.space.check(np.atleast_2d(tuples))
        out = np.zeros((t.shape[0], self.width))
        out[np.arange(t.shape[0])[:, None], self.offsets + t] = 1.0
        return out
