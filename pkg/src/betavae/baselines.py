"""PCA and FastICA baselines on flattened images."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import inv_sqrtm, symmetric_eigh
from .rng import Rng

# training-sample caps for (kind, grayscale?)
SAMPLE_CAPS = {("pca", True): 25_000, ("pca", False): 3_500, ("ica", True): 2_500, ("ica", False): 1_000}


class RankError(ValueError):
    """Data has fewer nonzero variance directions than components requested."""


def default_sample_cap(kind: str, channels: int) -> int:
    return SAMPLE_CAPS[(kind, channels == 1)]


@dataclass
class LinearModel:
    kind: str  # "pca" | "ica"
    mean: np.ndarray  # [D]
    components: np.ndarray  # [k, D]; projection rows
    whitener: np.ndarray | None = None  # [k, D] for ICA
    mixing: np.ndarray | None = None  # [D, k] for ICA inverse
    explained_variance: np.ndarray | None = None
    converged: bool = True
    n_iter: int = 0
    max_iter: int = 0
    tol: float = 0.0

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    def _flat(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        X = X.reshape(X.shape[0], -1)
        if X.shape[1] != self.input_dim:
            raise ValueError(f"data has {X.shape[1]} features, model expects {self.input_dim}")
        return X

    def transform(self, X) -> np.ndarray:
        return (self._flat(X) - self.mean) @ self.components.T

    def inverse_transform(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        if Z.shape[-1] != self.k:
            raise ValueError(f"codes have width {Z.shape[-1]}, model has {self.k} components")
        basis = self.components if self.mixing is None else self.mixing.T
        return Z @ basis + self.mean

    # lets a fitted model serve directly as a metric encoder
    def __call__(self, images) -> np.ndarray:
        return self.transform(images)

    @property
    def latent_dim(self) -> int:
        return self.k


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(X.shape[0], -1)


def _fix_signs(components: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(components), axis=1)  # first index wins ties
    signs = np.sign(components[np.arange(len(components)), idx])
    signs[signs == 0] = 1.0
    return components * signs[:, None]


def _top_eig(X: np.ndarray, k: int):
    """Top-k eigenpairs of the sample covariance of centred X, descending.

    Works in the n x n Gram basis when n < D.
    """
    n, d = X.shape
    if n < d:
        w, u = symmetric_eigh(X @ X.T / (n - 1))
        w, u = w[::-1][:k], u[:, ::-1][:, :k]
        w = np.maximum(w, 0.0)
        comps = np.zeros((k, d))
        pos = w > w[0] * 1e-12 if w[0] > 0 else np.zeros(k, bool)
        comps[pos] = (X.T @ u[:, pos] / np.sqrt((n - 1) * w[pos])).T
        if not pos.all():
            comps = _complete_basis(comps, pos)
        return w, comps
    w, v = symmetric_eigh(X.T @ X / (n - 1))
    return np.maximum(w[::-1][:k], 0.0), v[:, ::-1][:, :k].T


def _complete_basis(comps: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Fill zero-variance rows with unit vectors orthogonal to the kept rows."""
    k, d = comps.shape
    q, _ = np.linalg.qr(np.vstack([comps[keep], np.eye(d)]).T)
    out = comps.copy()
    out[~keep] = q[:, keep.sum():keep.sum() + (~keep).sum()].T
    return out


def pca_fit(X, k: int) -> LinearModel:
    X = _as_matrix(X)
    n, d = X.shape
    if n < 2:
        raise ValueError("PCA needs at least two samples")
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k={k} outside [1, min(n={n}, D={d})]")
    mean = X.mean(axis=0)
    w, comps = _top_eig(X - mean, k)
    return LinearModel("pca", mean, _fix_signs(comps), explained_variance=w)


def _sym_decorrelate(W: np.ndarray) -> np.ndarray:
    return inv_sqrtm(W @ W.T) @ W


def ica_fit(X, k: int = 10, max_iter: int = 200, tol: float = 1e-4, seed: int = 0,
            alpha: float = 1.0) -> LinearModel:
    """FastICA: PCA whitening, then symmetric fixed-point iteration with logcosh contrast.

    A non-finite ``tol`` disables the convergence test: one iteration runs
    and the model is flagged unconverged.
    """
    X = _as_matrix(X)
    n, d = X.shape
    if not n > k:
        raise ValueError(f"ICA needs more samples than components (n={n}, k={k})")
    if k > d:
        raise ValueError(f"k={k} exceeds dimension {d}")
    mean = X.mean(axis=0)
    Xc = X - mean
    w, E = _top_eig(Xc, k)
    if w[-1] <= max(w[0], 1.0) * 1e-10:
        raise RankError(f"component {k} has zero variance; cannot whiten to {k} dimensions")
    whitener = E / np.sqrt(w)[:, None]
    Z = Xc @ whitener.T  # [n, k], identity covariance

    W = _sym_decorrelate(Rng(seed).normal((k, k)))
    finite = math.isfinite(tol)
    iters = max_iter if finite else 1
    converged = False
    it = 0
    for it in range(1, iters + 1):
        U = Z @ W.T
        G = np.tanh(alpha * U)
        Gp = alpha * (1.0 - G * G)
        W_new = _sym_decorrelate(G.T @ Z / n - Gp.mean(axis=0)[:, None] * W)
        lim = np.max(np.abs(np.abs(np.sum(W_new * W, axis=1)) - 1.0))
        W = W_new
        if finite and lim < tol:
            converged = True
            break
    unmix = W @ whitener
    mixing = np.linalg.pinv(unmix)
    return LinearModel("ica", mean, unmix, whitener=whitener, mixing=mixing, explained_variance=w,
                       converged=converged, n_iter=it, max_iter=max_iter, tol=tol)


def fit_baseline(kind: str, X, k: int = 10, seed: int = 0, cap: int | None = None, **ica_kwargs) -> LinearModel:
    """Fit PCA or ICA on at most ``cap`` rows (default cap per kind/colour)."""
    if kind not in ("pca", "ica"):
        raise ValueError(f"unknown baseline {kind!r}")
    X = np.asarray(X, dtype=np.float64)
    channels = X.shape[1] if X.ndim == 4 else 1
    cap = default_sample_cap(kind, channels) if cap is None else cap
    if X.shape[0] > cap:
        X = X[np.sort(Rng(seed).choice(X.shape[0], cap))]
    if kind == "pca":
        return pca_fit(X, k)
    return ica_fit(X, k, seed=seed, **ica_kwargs)


def save_linear_model(model: LinearModel, path):
    from .vae.checkpoint import write_checkpoint

    tensors = [model.mean, model.components]
    if model.kind == "ica":
        tensors += [model.whitener, model.mixing]
    return write_checkpoint(path, model.kind, model.k, (model.input_dim,), tensors)


def load_linear_model(path) -> LinearModel:
    from .vae.checkpoint import CheckpointError, read_checkpoint

    ck = read_checkpoint(path)
    t = ck["tensors"]
    if ck["arch"] == "pca":
        return LinearModel("pca", t[0], t[1])
    if ck["arch"] == "ica":
        return LinearModel("ica", t[0], t[1], whitener=t[2], mixing=t[3])
    raise CheckpointError(f"{path}: holds a {ck['arch']} model, not a linear baseline")
