"""Frechet distance between Gaussians fit to image features."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import DimensionError
from .linalg import symmetric_eigh, symmetric_eigvalsh

NEG_EIG_LIMIT = -1e-6
ACTV_MAGIC = b"ACTV"
ACTV_VERSION = 1
_ACTV_HEADER = struct.Struct("<4sIIQ")


class CovarianceError(ValueError):
    """Covariance has an eigenvalue below the tolerated negative threshold."""


class ActivationFileError(ValueError):
    pass


@dataclass
class GaussianStats:
    """Mean and covariance of n feature rows.

    ``factor`` (optional, [m, d]) satisfies sigma = factor.T @ factor. It is
    kept when m <= d, so distances between rank-deficient fits can run in
    the small m-dimensional space.
    """

    mu: np.ndarray
    sigma: np.ndarray
    n: int
    factor: np.ndarray | None = field(default=None, repr=False)
    _sqrt: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        d = self.mu.shape[0]
        if self.sigma.shape != (d, d):
            raise DimensionError(f"mean has length {d} but covariance is {self.sigma.shape}")
        if self.n < 2:
            raise ValueError("Gaussian stats need n >= 2")

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    def sqrt_sigma(self) -> np.ndarray:
        """Symmetric PSD square root, after the validity check; cached."""
        if self._sqrt is None:
            w, v = symmetric_eigh(self.sigma)
            _check_eigs(w)
            self._sqrt = (v * np.sqrt(np.maximum(w, 0.0))) @ v.T
        return self._sqrt


def _check_eigs(w):
    if w.size and w.min() < NEG_EIG_LIMIT:
        raise CovarianceError(f"covariance eigenvalue {w.min():.3g} is below {NEG_EIG_LIMIT}")


def fit_gaussian(features) -> GaussianStats:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"features must be a matrix, got shape {X.shape}")
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least two feature rows")
    mu = X.mean(axis=0)
    F = (X - mu) / np.sqrt(n - 1)
    S = F.T @ F
    return GaussianStats(mu, 0.5 * (S + S.T), n, factor=F if n <= d else None)


def merge_stats(a: GaussianStats, b: GaussianStats) -> GaussianStats:
    """Stats of the union of two samples, from the per-shard stats."""
    if a.d != b.d:
        raise DimensionError(f"cannot merge stats of dimension {a.d} and {b.d}")
    n = a.n + b.n
    delta = b.mu - a.mu
    mu = a.mu + delta * (b.n / n)
    m2 = (a.n - 1) * a.sigma + (b.n - 1) * b.sigma + (a.n * b.n / n) * np.outer(delta, delta)
    factor = None
    if a.factor is not None and b.factor is not None and a.factor.shape[0] + b.factor.shape[0] + 1 <= a.d:
        factor = np.vstack([np.sqrt(a.n - 1) * a.factor, np.sqrt(b.n - 1) * b.factor,
                            np.sqrt(a.n * b.n / n) * delta[None]]) / np.sqrt(n - 1)
    sigma = m2 / (n - 1)
    return GaussianStats(mu, 0.5 * (sigma + sigma.T), n, factor=factor)


def trace_sqrt_product(a: GaussianStats, b: GaussianStats) -> float:
    """Tr((sigma_a sigma_b)^(1/2)) via the symmetric sandwich S_a sigma_b S_a."""
    if a.factor is not None and b.factor is not None:
        # nonzero eigenvalues of S_a sigma_b S_a are the squared singular values of F_a F_b^T
        return float(np.sum(np.linalg.svd(a.factor @ b.factor.T, compute_uv=False)))
    if b.factor is None:
        _check_eigs(symmetric_eigvalsh(b.sigma))
    s = a.sqrt_sigma()
    lam = symmetric_eigvalsh(s @ b.sigma @ s)
    _check_eigs(lam)
    return float(np.sum(np.sqrt(np.maximum(lam, 0.0))))


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    if a.d != b.d:
        raise DimensionError(f"stats have dimensions {a.d} and {b.d}")
    diff = a.mu - b.mu
    tr = np.trace(a.sigma) + np.trace(b.sigma) - 2.0 * trace_sqrt_product(a, b)
    return float(max(diff @ diff + tr, 0.0))


# feature extractors ----------------------------------------------------------

class FeatureExtractor:
    kind = "base"
    output_dim: int | None = None

    def __call__(self, images) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> str:
        return self.kind


class Flatten(FeatureExtractor):
    kind = "flatten"

    def __call__(self, images) -> np.ndarray:
        x = np.asarray(images, dtype=np.float64)
        return x.reshape(x.shape[0], -1)


class AvgPoolDownsample(FeatureExtractor):
    kind = "avgpool"

    def __init__(self, factor: int = 2):
        if factor < 1:
            raise ValueError("pool factor must be >= 1")
        self.factor = factor

    def __call__(self, images) -> np.ndarray:
        x = np.asarray(images, dtype=np.float64)
        if x.ndim != 4:
            raise DimensionError(f"AvgPoolDownsample expects [N, C, H, W], got {x.shape}")
        n, c, h, w = x.shape
        f = self.factor
        if h % f or w % f:
            raise DimensionError(f"image size {h}x{w} is not divisible by pool factor {f}")
        return x.reshape(n, c, h // f, f, w // f, f).mean(axis=(3, 5)).reshape(n, -1)

    def describe(self) -> str:
        return f"avgpool{self.factor}"


class PcaProjector(FeatureExtractor):
    kind = "pca"

    def __init__(self, model):
        self.model = model
        self.output_dim = model.k

    def __call__(self, images) -> np.ndarray:
        return self.model.transform(images)


class ExternalActivations(FeatureExtractor):
    """Features precomputed elsewhere and stored as an activation file."""

    kind = "external"

    def __init__(self, path):
        self.path = Path(path)
        self.output_dim, self.n = read_activation_header(self.path)

    def __call__(self, images=None) -> np.ndarray:
        return read_activations(self.path)

    def stats(self, chunk_rows: int = 4096) -> GaussianStats:
        return stats_from_activation_file(self.path, chunk_rows)


def extract_features(extractor, images) -> np.ndarray:
    return extractor(images)


def make_extractor(spec: str) -> FeatureExtractor:
    """Parse "flatten", "avgpool:F" or "external:PATH"."""
    kind, _, arg = spec.partition(":")
    if kind == "flatten":
        return Flatten()
    if kind == "avgpool":
        return AvgPoolDownsample(int(arg or 2))
    if kind == "external":
        return ExternalActivations(arg)
    raise ValueError(f"unknown feature extractor {spec!r}")


def fid_score(extractor, real_images, generated_images) -> float:
    a = fit_gaussian(extractor(real_images))
    b = fit_gaussian(extractor(generated_images))
    return frechet_distance(a, b)


# activation files ------------------------------------------------------------

def write_activations(path, features) -> Path:
    X = np.ascontiguousarray(features, dtype="<f8")
    if X.ndim != 2:
        raise DimensionError(f"activations must be a matrix, got shape {X.shape}")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_ACTV_HEADER.pack(ACTV_MAGIC, ACTV_VERSION, X.shape[1], X.shape[0]))
        fh.write(X.tobytes())
    os.replace(tmp, path)
    return path


def read_activation_header(path) -> tuple[int, int]:
    with open(path, "rb") as fh:
        head = fh.read(_ACTV_HEADER.size)
    if len(head) < _ACTV_HEADER.size:
        raise ActivationFileError(f"{path}: truncated header")
    magic, version, d, n = _ACTV_HEADER.unpack(head)
    if magic != ACTV_MAGIC:
        raise ActivationFileError(f"{path}: bad magic {magic!r}")
    if version != ACTV_VERSION:
        raise ActivationFileError(f"{path}: unsupported version {version}")
    expected = _ACTV_HEADER.size + 8 * d * n
    size = os.path.getsize(path)
    if size != expected:
        raise ActivationFileError(f"{path}: expected {expected} bytes for {n}x{d}, found {size}")
    return d, n


def _iter_activation_chunks(path, chunk_rows: int):
    d, n = read_activation_header(path)
    with open(path, "rb") as fh:
        fh.seek(_ACTV_HEADER.size)
        left = n
        while left:
            m = min(chunk_rows, left)
            yield np.frombuffer(fh.read(8 * m * d), dtype="<f8").reshape(m, d).astype(np.float64)
            left -= m


def read_activations(path) -> np.ndarray:
    d, n = read_activation_header(path)
    chunks = list(_iter_activation_chunks(path, max(n, 1)))
    return chunks[0] if chunks else np.zeros((0, d))


def stats_from_activation_file(path, chunk_rows: int = 4096) -> GaussianStats:
    """Gaussian stats accumulated shard by shard; shards of one row are absorbed whole."""
    total = None
    pending = None
    for X in _iter_activation_chunks(path, chunk_rows):
        if pending is not None:
            X = np.vstack([pending, X])
            pending = None
        if X.shape[0] < 2:
            pending = X
            continue
        s = fit_gaussian(X)
        total = s if total is None else merge_stats(total, s)
    if pending is not None:
        if total is None:
            raise ValueError(f"{path}: need at least two activation rows")
        x = pending[0]
        n = total.n + 1
        delta = x - total.mu
        m2 = (total.n - 1) * total.sigma + (total.n / n) * np.outer(delta, delta)
        total = GaussianStats(total.mu + delta / n, m2 / (n - 1), n)
    if total is None:
        raise ValueError(f"{path}: need at least two activation rows")
    return total


def fid_from_activation_files(path_a, path_b) -> float:
    return frechet_distance(stats_from_activation_file(path_a), stats_from_activation_file(path_b))
