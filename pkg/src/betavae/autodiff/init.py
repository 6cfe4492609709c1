"""Parameter initializers."""

import numpy as np

from ..rng import Rng
from .tensor import Tensor, parameter


def glorot_uniform(rng: Rng, shape: tuple, fan_in: int, fan_out: int) -> Tensor:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return parameter(rng.uniform(-a, a, size=shape))


def dense_weight(rng: Rng, n_in: int, n_out: int) -> Tensor:
    return glorot_uniform(rng, (n_in, n_out), n_in, n_out)


def conv_kernel(rng: Rng, shape: tuple) -> Tensor:
    """Kernel laid out [out, in, kh, kw] for conv or [in, out, kh, kw] for deconv."""
    a, b, kh, kw = shape
    return glorot_uniform(rng, shape, b * kh * kw, a * kh * kw)


def zeros(n: int | tuple) -> Tensor:
    return parameter(np.zeros(n))
