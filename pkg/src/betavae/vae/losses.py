"""Reconstruction and KL terms of the (beta-weighted) negative ELBO.

All losses are means over the batch of per-datum sums.
"""

from __future__ import annotations

import math

import numpy as np

from .. import autodiff as ad
from ..autodiff import DimensionError, Tensor
from ..rng import Rng


class DomainError(ValueError):
    """Input outside the support of the likelihood."""


def _const(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def reparameterize(mu: Tensor, logvar: Tensor, noise) -> Tensor:
    """z = mu + exp(logvar / 2) * noise; noise is a constant of the graph."""
    noise = Tensor(noise.data if isinstance(noise, Tensor) else np.asarray(noise, dtype=np.float64))
    if not (mu.shape == logvar.shape == noise.shape):
        raise DimensionError(f"reparameterize: shapes {mu.shape}, {logvar.shape}, {noise.shape}")
    return ad.add(mu, ad.mul(ad.exp(ad.scale(logvar, 0.5)), noise))


def kl_gaussian(mu, logvar) -> Tensor:
    """KL(N(mu, diag(exp(logvar))) || N(0, I)), averaged over the batch."""
    mu, logvar = ad.as_tensor(mu), ad.as_tensor(logvar)
    if mu.shape != logvar.shape:
        raise DimensionError(f"kl_gaussian: shapes {mu.shape} and {logvar.shape} differ")
    n = mu.shape[0] if mu.ndim > 1 else 1
    inner = ad.sub(ad.add(ad.square(mu), ad.exp(logvar)), ad.add_scalar(logvar, 1.0))
    return ad.scale(ad.sum(inner), 0.5 / n)


def recon_bernoulli(x, logits: Tensor) -> Tensor:
    """Summed binary cross-entropy of x against sigmoid(logits).

    Uses softplus(l) - x*l, which equals -[x log p + (1-x) log(1-p)] for
    p = sigmoid(l) without forming p.
    """
    xd = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if xd.size != logits.size:
        raise DimensionError(f"recon_bernoulli: x {xd.shape} vs logits {logits.shape}")
    if np.any(xd < 0) or np.any(xd > 1):
        raise DomainError("Bernoulli targets must lie in [0, 1]")
    xt = Tensor(xd.reshape(logits.shape))
    n = logits.shape[0]
    return ad.scale(ad.sum(ad.sub(ad.softplus(logits), ad.mul(xt, logits))), 1.0 / n)


def recon_gaussian_sigma(x, xhat: Tensor, sigma2: float, D: int | None = None) -> Tensor:
    """(D / 2 sigma2) * MSE(xhat, x) + D * log(sigma), batch-averaged.

    MSE is the per-datum mean over its pixels. With ``D`` equal to the
    pixel count the first term is ||xhat - x||^2 / (2 sigma2).
    """
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    xd = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if xd.size != xhat.size:
        raise DimensionError(f"recon_gaussian_sigma: x {xd.shape} vs xhat {xhat.shape}")
    n = xhat.shape[0]
    pixels = xhat.size // n
    D = pixels if D is None else D
    resid = ad.sub(xhat, Tensor(xd.reshape(xhat.shape)))
    mse_term = ad.scale(ad.sum(ad.square(resid)), D / (2.0 * sigma2 * pixels * n))
    return ad.add_scalar(mse_term, D * 0.5 * math.log(sigma2))


def reconstruction(model, x, logits: Tensor) -> Tensor:
    lk = model.likelihood
    if lk.kind == "bernoulli":
        return recon_bernoulli(x, logits)
    return recon_gaussian_sigma(x, ad.sigmoid(logits), lk.sigma2)


def beta_vae_loss(model, x, beta: float, rng: Rng | None = None, noise=None):
    """(total, recon, kl) with total = recon + beta * kl from one reparameterized sample."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    mu, logvar = model.encode(x)
    if noise is None:
        if rng is None:
            raise ValueError("pass either rng or noise")
        noise = rng.normal(mu.shape)
    z = reparameterize(mu, logvar, noise)
    recon = reconstruction(model, x, model.decode(z))
    kl = kl_gaussian(mu, logvar)
    total = ad.add(recon, ad.scale(kl, beta))
    return total, recon, kl
