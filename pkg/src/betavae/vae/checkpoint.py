"""Versioned binary checkpoints.

Layout (little-endian)::

    b"BVAE"  u32 version  u8 arch_tag  u32 latent_dim
    u8 likelihood_tag  f64 sigma2
    u8 C  u16 H  u16 W            (input image shape)
    u32 n_tensors
    n_tensors x (u8 rank, rank x u32 extent, prod(extents) x f64)

``arch_tag`` 0 = MLP VAE, 1 = conv VAE, 2 = PCA, 3 = ICA. Tensors are
stored in the model's canonical parameter order.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from ..autodiff import parameter
from .models import CONV, MLP, Likelihood, VaeModel

MAGIC = b"BVAE"
VERSION = 1
ARCH_TAGS = {MLP: 0, CONV: 1, "pca": 2, "ica": 3}
_TAG_ARCH = {v: k for k, v in ARCH_TAGS.items()}
_LIK_TAGS = {"bernoulli": 0, "gaussian": 1}
_TAG_LIK = {v: k for k, v in _LIK_TAGS.items()}


class CheckpointError(ValueError):
    pass


def write_checkpoint(path, arch: str, latent_dim: int, image_shape, tensors,
                     likelihood: Likelihood | None = None) -> Path:
    likelihood = likelihood or Likelihood()
    c, h, w = image_shape if len(image_shape) == 3 else (0, 0, image_shape[-1])
    buf = bytearray(MAGIC)
    buf += struct.pack("<IBI", VERSION, ARCH_TAGS[arch], latent_dim)
    buf += struct.pack("<Bd", _LIK_TAGS[likelihood.kind], likelihood.sigma2)
    buf += struct.pack("<BHHI", c, h, w, len(tensors))
    for t in tensors:
        t = np.ascontiguousarray(t, dtype="<f8")
        buf += struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}I", *t.shape)
        buf += t.tobytes()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(buf))
    os.replace(tmp, path)
    return path


def read_checkpoint(path) -> dict:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {data[:4]!r}")
    try:
        version, tag, latent = struct.unpack_from("<IBI", data, 4)
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        lik_tag, sigma2 = struct.unpack_from("<Bd", data, 13)
        c, h, w, n = struct.unpack_from("<BHHI", data, 22)
        pos = 31
        tensors = []
        for _ in range(n):
            (rank,) = struct.unpack_from("<B", data, pos)
            shape = struct.unpack_from(f"<{rank}I", data, pos + 1)
            pos += 1 + 4 * rank
            count = int(np.prod(shape, dtype=np.int64))
            if pos + 8 * count > len(data):
                raise CheckpointError(f"{path}: truncated tensor payload")
            tensors.append(np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape).copy())
            pos += 8 * count
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated header ({exc})")
    image_shape = (c, h, w) if c else (w,)
    return {"arch": _TAG_ARCH[tag], "latent_dim": latent, "image_shape": image_shape,
            "likelihood": Likelihood(_TAG_LIK[lik_tag], sigma2), "tensors": tensors}


def save_model(model: VaeModel, path) -> Path:
    return write_checkpoint(path, model.arch, model.latent_dim, model.image_shape,
                            [p.data for p in model.params.values()], model.likelihood)


def load_model(path) -> VaeModel:
    from .models import build_conv, build_mlp

    ck = read_checkpoint(path)
    arch, tensors = ck["arch"], ck["tensors"]
    if arch == MLP:
        # weights alternate w, b; hidden widths are the column counts of each w
        ws = tensors[0::2]
        n_enc = next(i for i, w in enumerate(ws) if w.shape[1] == 2 * ck["latent_dim"]) + 1
        enc_hidden = [w.shape[1] for w in ws[:n_enc - 1]]
        dec_hidden = [w.shape[1] for w in ws[n_enc:-1]]
        model = build_mlp(ck["latent_dim"], ck["image_shape"], None, enc_hidden, dec_hidden, ck["likelihood"])
    elif arch == CONV:
        channels = tensors[0].shape[0]
        depth = sum(1 for t in tensors if t.ndim == 4) // 2
        fc_hidden = tensors[2 * depth].shape[1]
        model = build_conv(ck["latent_dim"], ck["image_shape"], None, channels, depth, fc_hidden, ck["likelihood"])
    else:
        raise CheckpointError(f"{path}: holds a {arch} model, not a VAE")
    if len(tensors) != len(model.params):
        raise CheckpointError(f"{path}: expected {len(model.params)} tensors, found {len(tensors)}")
    for (name, p), t in zip(model.params.items(), tensors):
        if p.shape != t.shape:
            raise CheckpointError(f"{path}: tensor {name} has shape {t.shape}, expected {p.shape}")
        model.params[name] = parameter(t)
    return model
