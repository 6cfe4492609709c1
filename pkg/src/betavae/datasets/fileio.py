"""Binary dataset files for externally produced factor-grid datasets.

Layout (little-endian)::

    b"DSET"  u32 version
    u8 K     K x (u8 name_len, name utf-8, u32 cardinality)
    u8 C  u16 H  u16 W
    u64 count
    count * C * H * W  u8 pixels, images in flat factor-index order

Pixels are scaled to [0, 1] on access.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .factors import FactorSpace
from ..rng import Rng

MAGIC = b"DSET"
VERSION = 1


class DatasetFormatError(ValueError):
    """Base class for malformed dataset files."""


class BadMagicError(DatasetFormatError):
    pass


class TruncatedError(DatasetFormatError):
    pass


class CardinalityMismatchError(DatasetFormatError):
    pass


def to_u8(images: np.ndarray) -> np.ndarray:
    images = np.asarray(images)
    if images.dtype == np.uint8:
        return images
    if images.min() < 0 or images.max() > 1:
        raise ValueError("float images must lie in [0, 1]")
    return np.rint(images * 255.0).astype(np.uint8)


def save_dataset(path, space: FactorSpace, images: np.ndarray) -> Path:
    pixels = to_u8(images)
    c, h, w = space.image_shape
    if pixels.shape != (pixels.shape[0], c, h, w):
        raise ValueError(f"images {pixels.shape} do not match image shape {space.image_shape}")
    buf = bytearray(MAGIC + struct.pack("<IB", VERSION, len(space.factors)))
    for name, card in space.factors:
        raw = name.encode("utf-8")
        buf += struct.pack("<B", len(raw)) + raw + struct.pack("<I", card)
    buf += struct.pack("<BHHQ", c, h, w, pixels.shape[0])
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(buf)
        fh.write(np.ascontiguousarray(pixels).tobytes())
    os.replace(tmp, path)
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, fmt: str):
        n = struct.calcsize(fmt)
        if self.pos + n > len(self.data):
            raise TruncatedError(f"header truncated at byte {self.pos}")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += n
        return out

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(f"header truncated at byte {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out


class FileDataset:
    """Read-only handle over a loaded dataset file."""

    def __init__(self, space: FactorSpace, pixels: np.ndarray, path=None):
        self.space = space
        self.pixels = pixels
        self.path = path

    def __len__(self) -> int:
        return self.pixels.shape[0]

    @property
    def image_shape(self) -> tuple:
        return self.space.image_shape

    def with_space(self, space: FactorSpace) -> "FileDataset":
        return FileDataset(space, self.pixels, self.path)

    def images_u8(self, tuples) -> np.ndarray:
        return self.pixels[self.space.encode(np.atleast_2d(tuples))]

    def images(self, tuples) -> np.ndarray:
        return self.images_u8(tuples) / 255.0

    def image_at(self, flat) -> np.ndarray:
        return self.pixels[np.atleast_1d(flat)] / 255.0

    def subset(self, n: int, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
        flat = np.sort(rng.choice(len(self), n, replace=False))
        return flat, self.image_at(flat)


def load_dataset(path) -> FileDataset:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise BadMagicError(f"{path}: expected magic {MAGIC!r}, found {data[:4]!r}")
    r = _Reader(data)
    r.pos = 4
    version, k = r.take("<IB")
    if version != VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version}")
    factors = []
    for _ in range(k):
        (n,) = r.take("<B")
        name = r.raw(n).decode("utf-8")
        (card,) = r.take("<I")
        factors.append((name, card))
    c, h, w, count = r.take("<BHHQ")
    expected = int(np.prod([card for _, card in factors], dtype=np.int64))
    if expected != count:
        raise CardinalityMismatchError(
            f"{path}: factor cardinalities multiply to {expected} but header lists {count} images")
    need = count * c * h * w
    payload = data[r.pos:]
    if len(payload) < need:
        raise TruncatedError(f"{path}: payload has {len(payload)} bytes, expected {need}")
    pixels = np.frombuffer(payload[:need], dtype=np.uint8).reshape(count, c, h, w)
    return FileDataset(FactorSpace(factors, (c, h, w)), pixels, path)
