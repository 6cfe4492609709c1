"""Minibatch training loop for beta-VAEs."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .. import autodiff as ad
from ..rng import Rng
from .losses import beta_vae_loss
from .models import VaeModel
from .optim import make_optimizer


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")
        self.epoch, self.batch, self.value = epoch, batch, value


@dataclass
class TrainConfig:
    beta: float = 1.0
    optimizer: str = "adagrad"
    lr: float = 1e-2
    batch_size: int = 256
    epochs: int = 30
    seed: int = 0
    lr_decay: bool = True  # divide lr by 5 for the final quarter of epochs

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")

    def decay_start(self) -> int:
        """First epoch trained at the reduced learning rate."""
        if not self.lr_decay:
            return self.epochs
        return self.epochs - int(math.floor(0.25 * self.epochs + 0.5))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainCurves:
    recon: list[float] = field(default_factory=list)
    kl: list[float] = field(default_factory=list)
    total: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)


def train(model: VaeModel, data: np.ndarray, config: TrainConfig,
          on_epoch: Callable[[int, VaeModel, TrainCurves], None] | None = None):
    """Train in place; returns (model, per-epoch curves).

    Shuffling and reparameterization noise come from independent child
    streams of ``config.seed``, so a run is a pure function of the seed,
    the initial parameters and the data.
    """
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")
    root = Rng(config.seed)
    shuffle_rng, noise_rng = root.child(1), root.child(2)
    opt = make_optimizer(config.optimizer, config.lr)
    params = model.parameters
    curves = TrainCurves()
    base_lr = opt.lr
    for epoch in range(config.epochs):
        opt.lr = base_lr / 5.0 if epoch >= config.decay_start() else base_lr
        order = shuffle_rng.permutation(n)
        sums = np.zeros(3)
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            ad.zero_grads(params)
            total, recon, kl = beta_vae_loss(model, data[idx], config.beta, noise_rng)
            value = total.item()
            if not math.isfinite(value):
                raise TrainingDiverged(epoch, b, value)
            ad.backward(total, params)
            opt.step(params)
            sums += len(idx) * np.array([recon.item(), kl.item(), value])
        recon_m, kl_m, total_m = sums / n
        curves.recon.append(recon_m)
        curves.kl.append(kl_m)
        curves.total.append(total_m)
        curves.lr.append(opt.lr)
        if on_epoch is not None:
            on_epoch(epoch, model, curves)
    return model, curves
