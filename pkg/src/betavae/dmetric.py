"""Disentanglement metric: classify which factor a batch of image pairs shared.

Each metric row is the mean absolute latent difference over L pairs that
agree on one uniformly chosen factor; a classifier then predicts that
factor from the row. Its test accuracy is the score.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .datasets import FactorSpace, exclude_factor, sample_pairs
from .rng import Rng

LINEAR = "linear"
MLP = "mlp"
SWEEP_COLUMNS = ("seed", "beta", "L", "classifier", "n_factors", "accuracy")


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class MetricConfig:
    L: int = 64
    B: int = 5000
    B_test: int = 1000
    classifier: str = LINEAR
    hidden: int = 64  # MLP classifier width
    excluded_factors: tuple = ()
    max_iter: int = 10_000
    grad_tol: float = 1e-5
    batch_images: int = 8192  # images rendered and encoded per batch

    def __post_init__(self):
        if self.L < 1 or self.B < 1 or self.B_test < 1:
            raise ContractError("L, B and B_test must be positive")
        if self.classifier not in (LINEAR, MLP):
            raise ContractError(f"unknown classifier {self.classifier!r}")

    def space_for(self, space: FactorSpace) -> FactorSpace:
        for name in self.excluded_factors:
            if name not in space.excluded:
                space = exclude_factor(space, name)
        if self.B < space.K:
            raise ContractError(f"B={self.B} is smaller than the number of factors {space.K}")
        return space


@dataclass
class MetricSet:
    X: np.ndarray  # [B, latent_dim], nonnegative
    y: np.ndarray  # [B] sampleable-factor labels
    X_test: np.ndarray
    y_test: np.ndarray
    factor_names: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.factor_names)


def _encode(encoder, dataset, tuples) -> np.ndarray:
    return np.asarray(encoder(dataset.images(tuples)), dtype=np.float64)


def zdiff_point(encoder, dataset, space: FactorSpace, y: int, L: int, rng: Rng) -> np.ndarray:
    """Mean |mu(x1) - mu(x2)| over L pairs sharing sampleable factor y."""
    v1, v2 = sample_pairs(space, y, L, rng)
    z = _encode(encoder, dataset, np.concatenate([v1, v2]))
    return np.abs(z[:L] - z[L:]).mean(axis=0)


def _rows(encoder, dataset, space: FactorSpace, n: int, L: int, rng: Rng, batch_images: int):
    """n metric rows; row b draws from its own child stream of ``rng``."""
    chunk = max(1, batch_images // (2 * L))
    labels = np.empty(n, dtype=np.int64)
    v1s, v2s = [], []
    out = []
    for b in range(n):
        r = rng.child(b)
        labels[b] = r.integers(space.K)
        v1, v2 = sample_pairs(space, int(labels[b]), L, r)
        v1s.append(v1)
        v2s.append(v2)
        if len(v1s) == chunk or b == n - 1:
            m = len(v1s)
            z = _encode(encoder, dataset, np.concatenate(v1s + v2s))
            half = m * L
            d = np.abs(z[:half] - z[half:]).reshape(m, L, -1).mean(axis=1)
            out.append(d)
            v1s, v2s = [], []
    return np.concatenate(out), labels


def build_metric_set(encoder, dataset, space: FactorSpace, config: MetricConfig, rng: Rng) -> MetricSet:
    space = config.space_for(space)
    X, y = _rows(encoder, dataset, space, config.B, config.L, rng.child(0), config.batch_images)
    Xt, yt = _rows(encoder, dataset, space, config.B_test, config.L, rng.child(1), config.batch_images)
    return MetricSet(X, y, Xt, yt, space.names)


# classifiers ---------------------------------------------------------------

def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class Classifier:
    kind: str
    mean: np.ndarray
    scale: np.ndarray
    weights: list
    n_iter: int
    grad_norm: float

    def _features(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale

    def logits(self, X) -> np.ndarray:
        h = self._features(X)
        if self.kind == LINEAR:
            W, b = self.weights
            return h @ W + b
        W1, b1, W2, b2 = self.weights
        return np.maximum(h @ W1 + b1, 0.0) @ W2 + b2

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.logits(X), axis=1)  # first maximum wins ties

    def accuracy(self, X, y) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y)))


def _standardizer(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return mean, scale


def _fit_linear(H, Y, max_iter, tol):
    """Full-batch gradient descent on mean cross-entropy, step 1/Lipschitz."""
    n, d = H.shape
    k = Y.shape[1]
    Ha = np.hstack([H, np.ones((n, 1))])
    lip = 0.5 * np.linalg.eigvalsh(Ha.T @ Ha / n)[-1]
    lr = 1.0 / lip
    Wa = np.zeros((d + 1, k))
    gnorm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        G = Ha.T @ (_softmax(Ha @ Wa) - Y) / n
        gnorm = float(np.linalg.norm(G))
        if gnorm < tol:
            break
        Wa -= lr * G
    return [Wa[:-1], Wa[-1]], it, gnorm


def _fit_mlp(H, Y, hidden, max_iter, tol, rng: Rng):
    """One ReLU hidden layer, full-batch Adam on mean cross-entropy."""
    n, d = H.shape
    k = Y.shape[1]
    a1 = np.sqrt(6.0 / (d + hidden))
    a2 = np.sqrt(6.0 / (hidden + k))
    params = [rng.uniform(-a1, a1, (d, hidden)), np.zeros(hidden),
              rng.uniform(-a2, a2, (hidden, k)), np.zeros(k)]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    lr, b1, b2, eps = 1e-2, 0.9, 0.999, 1e-8
    gnorm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        W1, c1, W2, c2 = params
        pre = H @ W1 + c1
        act = np.maximum(pre, 0.0)
        D = (_softmax(act @ W2 + c2) - Y) / n
        dact = (D @ W2.T) * (pre > 0)
        grads = [H.T @ dact, dact.sum(0), act.T @ D, D.sum(0)]
        gnorm = float(np.sqrt(sum(np.sum(g * g) for g in grads)))
        if gnorm < tol:
            break
        for p, g, mi, vi in zip(params, grads, m, v):
            mi *= b1
            mi += (1 - b1) * g
            vi *= b2
            vi += (1 - b2) * g * g
            p -= lr * (mi / (1 - b1 ** it)) / (np.sqrt(vi / (1 - b2 ** it)) + eps)
    return params, it, gnorm


def train_classifier(mset: MetricSet, config: MetricConfig, rng: Rng | None = None):
    """Fit on the training rows; returns (classifier, test accuracy)."""
    classes = np.unique(mset.y)
    if classes.size < 2:
        raise ContractError("metric set has a single class; nothing to classify")
    k = max(mset.K, int(mset.y.max()) + 1, int(mset.y_test.max()) + 1)
    mean, scale = _standardizer(mset.X)
    H = (mset.X - mean) / scale
    Y = np.eye(k)[mset.y]
    if config.classifier == LINEAR:
        weights, it, g = _fit_linear(H, Y, config.max_iter, config.grad_tol)
    else:
        weights, it, g = _fit_mlp(H, Y, config.hidden, config.max_iter, config.grad_tol, rng or Rng(0))
    clf = Classifier(config.classifier, mean, scale, weights, it, g)
    return clf, clf.accuracy(mset.X_test, mset.y_test)


def metric_score(encoder, dataset, space, config: MetricConfig, seed: int) -> float:
    rng = Rng(seed)
    mset = build_metric_set(encoder, dataset, space, config, rng.child(0))
    return train_classifier(mset, config, rng.child(1))[1]


def disentanglement_score(encoder, dataset, space: FactorSpace, config: MetricConfig, seeds) -> list[float]:
    seeds = list(seeds)
    if not seeds:
        raise ContractError("need at least one seed")
    return [metric_score(encoder, dataset, space, config, s) for s in seeds]


def sensitivity_sweep(encoder, dataset, space: FactorSpace, L_values, classifiers, seeds,
                      base: MetricConfig | None = None, beta: float | None = None) -> list[dict]:
    """Score grid over L x classifier x seed.

    Metric sets depend only on (seed, L), so each is built once and shared
    by all classifier families.
    """
    L_values, classifiers, seeds = list(L_values), list(classifiers), list(seeds)
    if not (L_values and classifiers and seeds):
        raise ContractError("sweep grids must be nonempty")
    base = base or MetricConfig()
    n_factors = base.space_for(space).K
    rows = []
    for seed in seeds:
        for L in L_values:
            cfg = replace(base, L=L)
            rng = Rng(seed)
            mset = build_metric_set(encoder, dataset, space, cfg, rng.child(0))
            for clf in classifiers:
                acc = train_classifier(mset, replace(cfg, classifier=clf), rng.child(1))[1]
                rows.append({"seed": seed, "beta": beta, "L": L, "classifier": clf,
                             "n_factors": n_factors, "accuracy": acc})
    return rows


def write_sweep_csv(rows, path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({c: ("" if r.get(c) is None else r[c]) for c in SWEEP_COLUMNS})
    tmp.replace(path)
    return path


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        out = []
        for r in csv.DictReader(fh):
            out.append({"seed": int(r["seed"]), "beta": float(r["beta"]) if r["beta"] else None,
                        "L": int(r["L"]), "classifier": r["classifier"],
                        "n_factors": int(r["n_factors"]), "accuracy": float(r["accuracy"])})
        return out


# oracle encoders -------------------------------------------------------------

def onehot_encoder(space: FactorSpace, noise: float = 0.0, seed: int = 0, drop: tuple = ()):
    """Encoder over FactorCodeDataset inputs: latent i equals a code of factor i.

    Each factor's one-hot block is collapsed to its value index scaled to
    [0, 1]; pairs sharing factor y then have exactly zero difference on
    coordinate y. Factors named in ``drop`` get no coordinate, which is the
    construction behind the "K-1 factors is enough" failure mode.
    """
    card = space.cardinalities
    offsets = np.concatenate([[0], np.cumsum(card)[:-1]])
    keep = [i for i, (name, _) in enumerate(space.factors) if name not in drop]
    rng = Rng(seed)

    def encode(codes):
        codes = np.asarray(codes)
        vals = np.stack([codes[:, offsets[i]:offsets[i] + card[i]].argmax(axis=1) / max(card[i] - 1, 1)
                         for i in keep], axis=1)
        if noise:
            vals = vals + noise * rng.normal(vals.shape)
        return vals

    return encode


def constant_encoder(width: int = 10):
    def encode(images):
        return np.zeros((len(images), width))
    return encode
