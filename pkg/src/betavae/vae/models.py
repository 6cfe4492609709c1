"""MLP and convolutional VAE architectures.

MLP (2D shapes): 4096 -> FC 1200 -> FC 1200 (ReLU) -> 2*latent; decoder
latent -> FC 1200 x3 (Tanh) -> linear 4096 logits.

Conv: three Conv 32x4x4 stride-2 layers, FC 256 x2 (ReLU) -> 2*latent;
the decoder mirrors it with transposed convolutions and ends in logits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import autodiff as ad
from ..autodiff import DimensionError, Tensor
from ..autodiff.init import conv_kernel, dense_weight, zeros
from ..rng import Rng

MLP = "mlp"
CONV = "conv"


@dataclass(frozen=True)
class Likelihood:
    kind: str = "bernoulli"  # or "gaussian"
    sigma2: float = 1.0

    def __post_init__(self):
        if self.kind not in ("bernoulli", "gaussian"):
            raise ValueError(f"unknown likelihood {self.kind!r}")
        if self.kind == "gaussian" and not self.sigma2 > 0:
            raise ValueError("Gaussian likelihood needs sigma2 > 0")


BERNOULLI = Likelihood()


class VaeModel:
    """Encoder/decoder parameter sets plus the architecture that uses them.

    ``params`` is an ordered name -> Tensor mapping; names starting with
    ``enc`` belong to the encoder, ``dec`` to the decoder.
    """

    def __init__(self, arch: str, latent_dim: int, image_shape: Sequence[int],
                 params: dict[str, Tensor], likelihood: Likelihood = BERNOULLI,
                 conv_channels: int = 32, conv_depth: int = 3):
        self.arch = arch
        self.latent_dim = int(latent_dim)
        self.image_shape = tuple(int(s) for s in image_shape)
        self.params = params
        self.likelihood = likelihood
        self.conv_channels = conv_channels
        self.conv_depth = conv_depth

    @property
    def input_dim(self) -> int:
        return int(np.prod(self.image_shape))

    @property
    def encoder_params(self) -> list[Tensor]:
        return [p for k, p in self.params.items() if k.startswith("enc")]

    @property
    def decoder_params(self) -> list[Tensor]:
        return [p for k, p in self.params.items() if k.startswith("dec")]

    @property
    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def n_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def _layers(self, prefix: str) -> list[tuple[Tensor, Tensor]]:
        out, i = [], 0
        while f"{prefix}{i}.w" in self.params:
            out.append((self.params[f"{prefix}{i}.w"], self.params[f"{prefix}{i}.b"]))
            i += 1
        return out

    # ---------------------------------------------------------------- input handling

    def _as_input(self, x) -> Tensor:
        x = ad.as_tensor(x) if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
        n = x.shape[0] if x.ndim else 0
        if x.ndim < 2 or int(np.prod(x.shape[1:])) != self.input_dim:
            raise DimensionError(
                f"input {x.shape} does not match model input {self.image_shape} "
                f"({self.input_dim} values per image)")
        if self.arch == MLP:
            return x if x.ndim == 2 else ad.reshape(x, (n, self.input_dim))
        if x.shape[1:] != self.image_shape:
            return ad.reshape(x, (n,) + self.image_shape)
        return x

    # ---------------------------------------------------------------- forward passes

    def encode(self, x) -> tuple[Tensor, Tensor]:
        h = self._as_input(x)
        if self.arch == CONV:
            for w, b in self._layers("enc_conv"):
                h = ad.relu(ad.add_channel_bias(ad.conv2d(h, w, 2, 1), b))
            h = ad.reshape(h, (h.shape[0], -1))
        fc = self._layers("enc_fc")
        for w, b in fc[:-1]:
            h = ad.relu(ad.linear(h, w, b))
        w, b = fc[-1]
        return ad.split_cols(ad.linear(h, w, b), self.latent_dim)

    def decode(self, z) -> Tensor:
        """Map latents to per-pixel logits, shaped [n, *image_shape]."""
        h = ad.as_tensor(z)
        fc = self._layers("dec_fc")
        if self.arch == MLP:
            for w, b in fc[:-1]:
                h = ad.tanh(ad.linear(h, w, b))
            w, b = fc[-1]
            return ad.reshape(ad.linear(h, w, b), (h.shape[0],) + self.image_shape)
        for w, b in fc:
            h = ad.relu(ad.linear(h, w, b))
        side = self.image_shape[1] >> self.conv_depth
        h = ad.reshape(h, (h.shape[0], self.conv_channels, side, side))
        deconvs = self._layers("dec_deconv")
        for i, (w, b) in enumerate(deconvs):
            h = ad.add_channel_bias(ad.deconv2d(h, w, 2, 1), b)
            if i < len(deconvs) - 1:
                h = ad.relu(h)
        return h

    # ---------------------------------------------------------------- inference helpers

    def encode_mean(self, images: np.ndarray, batch_size: int = 512) -> np.ndarray:
        """Latent means for a stack of images, without building a graph."""
        images = np.asarray(images, dtype=np.float64)
        out = np.empty((images.shape[0], self.latent_dim))
        with ad.no_grad():
            for i in range(0, images.shape[0], batch_size):
                out[i:i + batch_size] = self.encode(images[i:i + batch_size])[0].data
        return out

    __call__ = encode_mean

    def decode_mean(self, z: np.ndarray, batch_size: int = 512) -> np.ndarray:
        """Pixel means in [0, 1] (sigmoid of the logits)."""
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        out = np.empty((z.shape[0],) + self.image_shape)
        with ad.no_grad():
            for i in range(0, z.shape[0], batch_size):
                out[i:i + batch_size] = ad.sigmoid(self.decode(z[i:i + batch_size])).data
        return out

    def reconstruct(self, images: np.ndarray, batch_size: int = 512) -> np.ndarray:
        return self.decode_mean(self.encode_mean(images, batch_size), batch_size)

    def state(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.params.values()]


def _dense_stack(rng: Rng, prefix: str, sizes: Sequence[int], params: dict) -> None:
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        params[f"{prefix}{i}.w"] = dense_weight(rng, n_in, n_out)
        params[f"{prefix}{i}.b"] = zeros(n_out)


def build_mlp(latent_dim: int = 10, image_shape=(1, 64, 64), rng: Rng | None = None,
              encoder_hidden: Sequence[int] = (1200, 1200),
              decoder_hidden: Sequence[int] = (1200, 1200, 1200),
              likelihood: Likelihood = BERNOULLI) -> VaeModel:
    rng = rng or Rng(0)
    d = int(np.prod(image_shape))
    params: dict[str, Tensor] = {}
    _dense_stack(rng, "enc_fc", [d, *encoder_hidden, 2 * latent_dim], params)
    _dense_stack(rng, "dec_fc", [latent_dim, *decoder_hidden, d], params)
    return VaeModel(MLP, latent_dim, image_shape, params, likelihood)


def build_conv(latent_dim: int = 10, image_shape=(1, 64, 64), rng: Rng | None = None,
               channels: int = 32, depth: int = 3, fc_hidden: int = 256,
               likelihood: Likelihood = BERNOULLI) -> VaeModel:
    rng = rng or Rng(0)
    c, h, w = image_shape
    if h != w or h % (1 << depth):
        raise DimensionError(f"conv VAE needs square images divisible by {1 << depth}, got {image_shape}")
    params: dict[str, Tensor] = {}
    in_c = c
    for i in range(depth):
        params[f"enc_conv{i}.w"] = conv_kernel(rng, (channels, in_c, 4, 4))
        params[f"enc_conv{i}.b"] = zeros(channels)
        in_c = channels
    flat = channels * (h >> depth) ** 2
    _dense_stack(rng, "enc_fc", [flat, fc_hidden, fc_hidden, 2 * latent_dim], params)
    _dense_stack(rng, "dec_fc", [latent_dim, fc_hidden, fc_hidden, flat], params)
    for i in range(depth):
        out_c = c if i == depth - 1 else channels
        params[f"dec_deconv{i}.w"] = conv_kernel(rng, (channels, out_c, 4, 4))
        params[f"dec_deconv{i}.b"] = zeros(out_c)
    return VaeModel(CONV, latent_dim, image_shape, params, likelihood, channels, depth)


def build_model(arch: str, latent_dim: int = 10, image_shape=(1, 64, 64), seed: int = 0,
                hidden: int | None = None, likelihood: Likelihood = BERNOULLI) -> VaeModel:
    rng = Rng(seed)
    if arch == MLP:
        h = hidden or 1200
        return build_mlp(latent_dim, image_shape, rng, (h, h), (h, h, h), likelihood)
    if arch == CONV:
        return build_conv(latent_dim, image_shape, rng, fc_hidden=hidden or 256, likelihood=likelihood)
    raise ValueError(f"unknown architecture {arch!r}; expected 'mlp' or 'conv'")
