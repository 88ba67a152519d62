"""Time-major feature container and its ``DTFT`` file format.

Layout: magic ``DTFT``, version u16, U u32, dim u32, frame_rate f32,
then ``U * dim`` little-endian f32 values in row-major order.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._binio import VERSION, Reader, le_bytes
from .errors import DataError

MAGIC = b"DTFT"


@dataclass(frozen=True)
class FeatureSequence:
    """U x d matrix of per-frame features with its frame rate in Hz."""

    values: np.ndarray
    frame_rate: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] == 0:
            raise DataError(f"features must be U x d with d > 0, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("features contain non-finite values")
        if not self.frame_rate > 0:
            raise DataError(f"frame_rate must be positive, got {self.frame_rate}")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def to_bytes(feats: FeatureSequence) -> bytes:
    U, d = feats.values.shape
    head = MAGIC + struct.pack("<HIIf", VERSION, U, d, feats.frame_rate)
    return head + le_bytes(feats.values, "f4")


def from_bytes(buf: bytes) -> FeatureSequence:
    r = Reader(buf, MAGIC)
    r.version()
    U, d, rate = r.unpack("IIf")
    values = r.array("f4", U * d).astype(np.float64).reshape(U, d)
    r.finish()
    return FeatureSequence(values, float(rate))


def save(path, feats: FeatureSequence) -> None:
    Path(path).write_bytes(to_bytes(feats))


def load(path) -> FeatureSequence:
    return from_bytes(Path(path).read_bytes())
