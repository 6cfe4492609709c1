"""2-D convolution (cross-correlation) and its transpose.

Both are written around one im2col / col2im pair: conv2d gathers patches
and multiplies by the flattened kernel; deconv2d scatters the product back,
which makes each operation the exact adjoint of the other.
"""

from __future__ import annotations

import numpy as np

from .tensor import DimensionError, Tensor, _make


class ConfigurationError(ValueError):
    """Stride/padding/kernel combination yields no valid output grid."""


def conv_output_size(size: int, k: int, stride: int, padding: int) -> int:
    span = size + 2 * padding - k
    if stride < 1 or padding < 0:
        raise ConfigurationError(f"stride must be >= 1 and padding >= 0 (got {stride}, {padding})")
    if span < 0 or span % stride:
        raise ConfigurationError(
            f"extent {size} with kernel {k}, stride {stride}, padding {padding} "
            "does not give an integral output size")
    return span // stride + 1


def deconv_output_size(size: int, k: int, stride: int, padding: int) -> int:
    out = (size - 1) * stride - 2 * padding + k
    if out < 1:
        raise ConfigurationError(f"transposed conv of extent {size} gives empty output")
    return out


def _im2col(xp: np.ndarray, kh: int, kw: int, s: int, ho: int, wo: int) -> np.ndarray:
    n, c = xp.shape[:2]
    sn, sc, sh, sw = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, shape=(n, ho, wo, c, kh, kw),
        strides=(sn, sh * s, sw * s, sc, sh, sw), writeable=False)
    return view.reshape(n * ho * wo, c * kh * kw)


def _col2im(cols: np.ndarray, padded_shape: tuple, kh: int, kw: int, s: int,
            ho: int, wo: int) -> np.ndarray:
    n, c = padded_shape[:2]
    out = np.zeros(padded_shape)
    blocks = cols.reshape(n, ho, wo, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s] += blocks[:, :, i, j]
    return out


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _crop(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return x[:, :, p:-p, p:-p]


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlate x[N, C, H, W] with kernel[F, C, kh, kw]."""
    if x.ndim != 4 or kernel.ndim != 4 or x.shape[1] != kernel.shape[1]:
        raise DimensionError(f"conv2d: input {x.shape} and kernel {kernel.shape} disagree on channels")
    n, c, h, w = x.shape
    f, _, kh, kw = kernel.shape
    ho = conv_output_size(h, kh, stride, padding)
    wo = conv_output_size(w, kw, stride, padding)
    xp = _pad(x.data, padding)
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    kmat = kernel.data.reshape(f, -1)
    out = (cols @ kmat.T).reshape(n, ho, wo, f).transpose(0, 3, 1, 2)

    def bw(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, f)
        gk = (gmat.T @ cols).reshape(kernel.shape) if kernel.requires_grad else None
        gx = None
        if x.requires_grad:
            gx = _crop(_col2im(gmat @ kmat, xp.shape, kh, kw, stride, ho, wo), padding)
        return gx, gk

    return _make(np.ascontiguousarray(out), (x, kernel), bw, "conv2d")


def deconv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed convolution of x[N, C, H, W] with kernel[C, F, kh, kw].

    With the same (kernel size, stride, padding) it inverts the spatial
    shape change of :func:`conv2d`.
    """
    if x.ndim != 4 or kernel.ndim != 4 or x.shape[1] != kernel.shape[0]:
        raise DimensionError(f"deconv2d: input {x.shape} and kernel {kernel.shape} disagree on channels")
    n, c, h, w = x.shape
    _, f, kh, kw = kernel.shape
    ho = deconv_output_size(h, kh, stride, padding)
    wo = deconv_output_size(w, kw, stride, padding)
    padded_shape = (n, f, ho + 2 * padding, wo + 2 * padding)
    xmat = x.data.transpose(0, 2, 3, 1).reshape(-1, c)
    kmat = kernel.data.reshape(c, -1)
    out = _crop(_col2im(xmat @ kmat, padded_shape, kh, kw, stride, h, w), padding)

    def bw(g):
        cols = _im2col(_pad(g, padding), kh, kw, stride, h, w)
        gk = (xmat.T @ cols).reshape(kernel.shape) if kernel.requires_grad else None
        gx = None
        if x.requires_grad:
            gx = np.ascontiguousarray((cols @ kmat.T).reshape(n, h, w, c).transpose(0, 3, 1, 2))
        return gx, gk

    return _make(np.ascontiguousarray(out), (x, kernel), bw, "deconv2d")
