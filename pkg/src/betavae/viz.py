"""Latent traversal grids, ground-truth traversal embeddings and PGM/PPM output."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import pca_fit
from .datasets import FactorSpace

EMBEDDING_COLUMNS = ("factor_name", "factor_index", "pc1", "pc2")


def default_values() -> np.ndarray:
    return np.linspace(-3.0, 3.0, 11)


@dataclass
class TraversalSpec:
    """Seed (image array, or factor tuple rendered through a dataset) plus sweep values.

    ``dim=None`` traverses every latent coordinate, one grid row each.
    """

    seed: np.ndarray
    dim: int | None = None
    values: np.ndarray = field(default_factory=default_values)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("traversal values must be a nonempty list")
        if np.any(np.diff(self.values) < 0):
            raise ValueError("traversal values must be sorted")


def _seed_image(model, seed, dataset) -> np.ndarray:
    seed = np.asarray(seed)
    if seed.shape == tuple(model.image_shape):
        return seed.astype(np.float64)[None]
    if seed.ndim == 1 and np.issubdtype(seed.dtype, np.integer):
        if dataset is None:
            raise ValueError("a factor-tuple seed needs a dataset to render it")
        return dataset.images(seed[None])
    raise ValueError(f"seed of shape {seed.shape} is neither an image {tuple(model.image_shape)} nor a factor tuple")


def latent_traversal(model, spec: TraversalSpec, dataset=None) -> np.ndarray:
    """Decoded grid [rows, len(values), C, H, W]; row r sweeps latent dims[r] from the seed's mean code."""
    mu = model.encode_mean(_seed_image(model, spec.seed, dataset))[0]
    if spec.dim is None:
        dims = list(range(model.latent_dim))
    elif 0 <= spec.dim < model.latent_dim:
        dims = [spec.dim]
    else:
        raise ValueError(f"latent dim {spec.dim} outside [0, {model.latent_dim})")
    codes = np.repeat(mu[None, None], len(dims), axis=0).repeat(spec.values.size, axis=1)
    for r, d in enumerate(dims):
        codes[r, :, d] = spec.values
    flat = model.decode_mean(codes.reshape(-1, model.latent_dim))
    return flat.reshape(len(dims), spec.values.size, *flat.shape[1:])


@dataclass
class Embedding:
    factor_names: list
    factor_index: np.ndarray  # value index of the swept factor
    points: np.ndarray  # [n, 2]

    def rows(self):
        for name, idx, (p1, p2) in zip(self.factor_names, self.factor_index, self.points):
            yield {"factor_name": name, "factor_index": int(idx), "pc1": float(p1), "pc2": float(p2)}

    @property
    def radius(self) -> float:
        return float(np.max(np.linalg.norm(self.points, axis=1)))


def gt_traversal_embedding(model, space: FactorSpace, dataset, median_tuple=None) -> Embedding:
    """Sweep each sampleable factor over its full range from the median tuple; PCA(2) of the latent means."""
    base = space.median_tuple() if median_tuple is None else space.check(np.asarray(median_tuple))
    tuples, names, idx = [], [], []
    for col in space.sampleable:
        name, card = space.factors[col]
        t = np.repeat(base[None], card, axis=0)
        t[:, col] = np.arange(card)
        tuples.append(t)
        names += [name] * card
        idx.append(np.arange(card))
    mu = model.encode_mean(dataset.images(np.concatenate(tuples)))
    pca = pca_fit(mu, 2)
    return Embedding(names, np.concatenate(idx), pca.transform(mu))


def write_embedding_csv(embedding: Embedding, path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=EMBEDDING_COLUMNS)
        w.writeheader()
        w.writerows(embedding.rows())
    os.replace(tmp, path)
    return path


# portable pixmaps -------------------------------------------------------------

SEPARATOR = 255


def grid_canvas(grid) -> np.ndarray:
    """Tile [R, K, C, H, W] cells into a uint8 canvas with 1-px separators."""
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 5:
        raise ValueError(f"grid must be [rows, cols, C, H, W], got shape {g.shape}")
    if np.any(g < 0) or np.any(g > 1):
        raise ValueError("grid pixel values must lie in [0, 1]")
    R, K, C, H, W = g.shape
    if C not in (1, 3):
        raise ValueError(f"only 1- or 3-channel images can be written, got {C}")
    canvas = np.full((R * H + R - 1, K * W + K - 1, C), SEPARATOR, dtype=np.uint8)
    q = np.rint(g * 255).astype(np.uint8).transpose(0, 1, 3, 4, 2)
    for r in range(R):
        for k in range(K):
            canvas[r * (H + 1):r * (H + 1) + H, k * (W + 1):k * (W + 1) + W] = q[r, k]
    return canvas


def write_image_grid(grid, path) -> Path:
    """PGM (P5) for grayscale, PPM (P6) for RGB."""
    canvas = grid_canvas(grid)
    h, w, c = canvas.shape
    magic = b"P5" if c == 1 else b"P6"
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(canvas.tobytes())
    os.replace(tmp, path)
    return path


def read_pnm(path) -> np.ndarray:
    """[H, W, C] uint8 pixels of a binary PGM/PPM written by :func:`write_image_grid`."""
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos)
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    pos += 1  # single whitespace before the raster
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b"P5", b"P6") or maxval != 255:
        raise ValueError(f"{path}: unsupported pixmap {magic!r} maxval {maxval}")
    c = 1 if magic == b"P5" else 3
    raster = np.frombuffer(data, dtype=np.uint8, count=h * w * c, offset=pos)
    return raster.reshape(h, w, c)


def split_canvas(canvas: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`grid_canvas` (as uint8 cells [R, K, C, H, W])."""
    H = (canvas.shape[0] - rows + 1) // rows
    W = (canvas.shape[1] - cols + 1) // cols
    cells = np.stack([np.stack([canvas[r * (H + 1):r * (H + 1) + H, k * (W + 1):k * (W + 1) + W]
                                for k in range(cols)]) for r in range(rows)])
    return cells.transpose(0, 1, 4, 2, 3)
