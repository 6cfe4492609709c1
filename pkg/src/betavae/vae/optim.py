"""Adagrad and Adam over lists of parameter tensors."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..autodiff import Tensor


class Optimizer:
    def __init__(self, lr: float):
        self.lr = float(lr)
        self.t = 0

    def step(self, params: Sequence[Tensor], grads: Sequence[np.ndarray] | None = None) -> None:
        grads = [p.grad for p in params] if grads is None else grads
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            if g is None:
                continue
            if g.shape != p.shape:
                raise ValueError(f"gradient {g.shape} does not match parameter {p.shape}")
            self._update(i, p, g)

    def _update(self, i: int, p: Tensor, g: np.ndarray) -> None:
        raise NotImplementedError


class Adagrad(Optimizer):
    """theta -= lr * g / sqrt(sum of squared gradients + eps)."""

    def __init__(self, lr: float = 1e-2, eps: float = 1e-10):
        super().__init__(lr)
        self.eps = eps
        self.accum: dict[int, np.ndarray] = {}

    def _update(self, i, p, g):
        acc = self.accum.get(i)
        if acc is None:
            acc = self.accum[i] = np.zeros_like(g)
        acc += g * g
        p.data -= self.lr * g / np.sqrt(acc + self.eps)


class Adam(Optimizer):
    def __init__(self, lr: float = 5e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[int, np.ndarray] = {}
        self.v: dict[int, np.ndarray] = {}

    def _update(self, i, p, g):
        b1, b2 = self.beta1, self.beta2
        m = b1 * self.m.get(i, 0.0) + (1 - b1) * g
        v = b2 * self.v.get(i, 0.0) + (1 - b2) * g * g
        self.m[i], self.v[i] = m, v
        mhat = m / (1 - b1 ** self.t)
        vhat = v / (1 - b2 ** self.t)
        p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def make_optimizer(name: str, lr: float | None = None) -> Optimizer:
    name = name.lower()
    if name == "adagrad":
        return Adagrad(1e-2 if lr is None else lr)
    if name == "adam":
        return Adam(5e-4 if lr is None else lr)
    raise ValueError(f"unknown optimizer {name!r}")
