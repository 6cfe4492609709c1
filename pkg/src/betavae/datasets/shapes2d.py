"""Procedural 2D shapes: square, ellipse and heart on a 64x64 binary canvas.

Geometry (all in pixels, pixel (row i, col j) sampled at its integer centre):

* shape centre ``(16.5 + posX, 16.5 + posY)``; the half-integer offset keeps
  the region boundary off the pixel lattice, so quarter-turn rotations are
  exact.
* half extent ``10 * scale`` with ``scale`` in ``linspace(0.5, 1, 6)``.
* rotation ``2 * pi * r / 40``.

The largest rotated shape reaches about 14.2 px from its centre, so every
position on the 32-point lattice stays inside the frame.
"""

from __future__ import annotations

import numpy as np

from .factors import FactorError, FactorSpace, SHAPES2D_FACTORS, sample_tuples, shapes2d_space
from ..rng import Rng

SHAPE_NAMES = ("square", "ellipse", "heart")
SCALES = np.linspace(0.5, 1.0, 6)
N_ROTATIONS = 40
BASE_HALF_EXTENT = 10.0
POS_ORIGIN = 16.5
SIZE = 64

_ELLIPSE_MINOR = 0.6
_HEART_GAIN = 1.15
_HEART_SHIFT = 0.125


def _require_canonical(space: FactorSpace) -> None:
    if space.factors != SHAPES2D_FACTORS or space.image_shape != (1, SIZE, SIZE):
        raise FactorError("the 2D shapes renderer needs the canonical 3/6/40/32/32 factor space")


def _inside(shape: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Implicit-region test in shape-local coordinates (v points up)."""
    square = np.maximum(np.abs(u), np.abs(v)) <= 1.0
    ellipse = u * u + (v / _ELLIPSE_MINOR) ** 2 <= 1.0
    a = _HEART_GAIN * u
    b = _HEART_GAIN * v + _HEART_SHIFT
    heart = (a * a + b * b - 1.0) ** 3 - a * a * b ** 3 <= 0.0
    return np.where(shape == 0, square, np.where(shape == 1, ellipse, heart))


def render_batch(tuples: np.ndarray) -> np.ndarray:
    """Rasterize factor tuples [n, 5] into binary uint8 images [n, 1, 64, 64]."""
    t = np.atleast_2d(np.asarray(tuples, dtype=np.int64))
    shape, scale_i, rot_i, px, py = (t[:, k, None, None] for k in range(5))
    half = BASE_HALF_EXTENT * SCALES[scale_i]
    theta = 2.0 * np.pi * rot_i / N_ROTATIONS
    c, s = np.cos(theta), np.sin(theta)
    grid = np.arange(SIZE, dtype=np.float64)
    dx = grid[None, None, :] - (POS_ORIGIN + px)
    dy = grid[None, :, None] - (POS_ORIGIN + py)
    # rotate the canvas by -theta into shape coordinates; flip y so v is up
    u = (c * dx + s * dy) / half
    v = -(-s * dx + c * dy) / half
    img = _inside(shape, u, v)
    return img.astype(np.uint8)[:, None]


def render_2dshape(factors, space: FactorSpace | None = None) -> np.ndarray:
    """Binary [1, 64, 64] float image for one factor tuple."""
    space = space or shapes2d_space()
    _require_canonical(space)
    t = space.check(factors)
    if t.ndim != 1:
        raise FactorError("render_2dshape takes a single factor tuple")
    return render_batch(t)[0].astype(np.float64)


class ShapesDataset:
    """Procedural dataset handle over the full 737,280-image grid.

    Batch rendering translates cached centred templates, one per
    (shape, scale, rotation); this is bitwise equal to direct rasterization
    because positions are integer shifts of half-integer centres.
    """

    _PAD = 16

    def __init__(self, space: FactorSpace | None = None):
        space = space or shapes2d_space()
        _require_canonical(space)
        self.space = space
        self._templates: np.ndarray | None = None

    def with_space(self, space: FactorSpace) -> "ShapesDataset":
        out = ShapesDataset(space)
        out._templates = self._templates
        return out

    def __len__(self) -> int:
        return self.space.size

    @property
    def image_shape(self) -> tuple:
        return self.space.image_shape

    def _build_templates(self) -> np.ndarray:
        sh, sc, ro = np.meshgrid(np.arange(3), np.arange(6), np.arange(N_ROTATIONS), indexing="ij")
        t = np.stack([sh.ravel(), sc.ravel(), ro.ravel(),
                      np.full(sh.size, 16), np.full(sh.size, 16)], axis=1)
        imgs = render_batch(t)[:, 0]
        p = self._PAD
        return np.pad(imgs, ((0, 0), (p, p), (p, p)))

    def images_u8(self, tuples) -> np.ndarray:
        t = self.space.check(np.atleast_2d(tuples))
        if self._templates is None:
            self._templates = self._build_templates()
        key = (t[:, 0] * 6 + t[:, 1]) * N_ROTATIONS + t[:, 2]
        # rows of the output come from template rows offset by (16 - pos)
        r0 = self._PAD + 16 - t[:, 4]
        c0 = self._PAD + 16 - t[:, 3]
        rows = r0[:, None, None] + np.arange(SIZE)[None, :, None]
        cols = c0[:, None, None] + np.arange(SIZE)[None, None, :]
        out = self._templates[key[:, None, None], rows, cols]
        return out[:, None]

    def images(self, tuples) -> np.ndarray:
        return self.images_u8(tuples).astype(np.float64)

    def image_at(self, flat) -> np.ndarray:
        return self.images(self.space.decode(np.atleast_1d(flat)))

    def subset(self, n: int, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
        """n distinct grid images chosen uniformly: (flat indices, float images)."""
        flat = np.sort(rng.choice(self.space.size, n, replace=False))
        return flat, self.images(self.space.decode(flat))

    def sample(self, n: int, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
        t = sample_tuples(self.space, n, rng)
        return t, self.images(t)
