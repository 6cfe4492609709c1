"""Symmetric eigendecomposition.

Small matrices use cyclic Jacobi rotations (vectorized over rows/columns);
large ones fall through to LAPACK's ``eigh``, since Python-level sweeps are
O(d^3) per sweep with interpreter overhead per rotation.
"""

from __future__ import annotations

import numpy as np

JACOBI_MAX_DIM = 64


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: n - 1 rounds of disjoint (p, q) pairs covering every pair once."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        if pairs:
            p, q = np.array(pairs).T
            rounds.append((p, q))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def jacobi_eigh(a: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100):
    """Eigenvalues (ascending) and column eigenvectors of symmetric ``a``.

    Parallel cyclic Jacobi: each round rotates a set of disjoint index
    pairs at once, so a sweep is n - 1 dense products instead of n^2 / 2
    scalar rotations.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"expected a square matrix, got {a.shape}")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    scale = max(np.linalg.norm(a), 1e-300)
    rounds = _round_robin(n)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p, q in rounds:
            apq = a[p, q]
            live = np.abs(apq) > 1e-300
            if not live.any():
                continue
            p, q, apq = p[live], q[live], apq[live]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            safe = np.where(big, 1.0, theta)
            t = np.where(big, 0.5 / np.where(big, theta, 1.0),
                         np.where(safe == 0, 1.0, np.sign(safe) / (np.abs(safe) + np.sqrt(safe * safe + 1.0))))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rot = np.eye(n)
            rot[p, p] = c
            rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            a = 0.5 * (a + a.T)
            v = v @ rot
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def symmetric_eigh(a: np.ndarray):
    """Ascending eigenpairs of a symmetric matrix."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape[0] <= JACOBI_MAX_DIM:
        return jacobi_eigh(a)
    return np.linalg.eigh(0.5 * (a + a.T))


def sqrtm_psd(a: np.ndarray, clamp: float = 0.0) -> np.ndarray:
    w, v = symmetric_eigh(a)
    w = np.where(w < clamp, 0.0, w)
    return (v * np.sqrt(np.maximum(w, 0.0))) @ v.T


def inv_sqrtm(a: np.ndarray) -> np.ndarray:
    w, v = symmetric_eigh(a)
    return (v / np.sqrt(w)) @ v.T


def symmetric_eigvalsh(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape[0] <= JACOBI_MAX_DIM:
        return jacobi_eigh(a)[0]
    return np.linalg.eigvalsh(0.5 * (a + a.T))
