"""Little-endian header packing used by the DT* file formats."""
from __future__ import annotations

import struct

import numpy as np

from .errors import BadMagicError, FormatError, TruncatedError

VERSION = 1


class Reader:
    """Sequential reader over a byte buffer that raises on truncation."""

    def __init__(self, buf: bytes, magic: bytes):
        self.buf = memoryview(buf)
        self.pos = 0
        if len(buf) < len(magic):
            raise TruncatedError(f"payload shorter than magic {magic!r}")
        head = bytes(self.buf[: len(magic)])
        if head != magic:
            raise BadMagicError(f"expected magic {magic!r}, got {head!r}")
        self.pos = len(magic)

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise TruncatedError(f"need {size} bytes at offset {self.pos}, have {len(self.buf) - self.pos}")
        out = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return out if len(out) > 1 else out[0]

    def version(self) -> int:
        v = self.unpack("H")
        if v != VERSION:
            raise FormatError(f"unsupported version {v}")
        return v

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype).newbyteorder("<")
        size = dt.itemsize * count
        if self.pos + size > len(self.buf):
            raise TruncatedError(f"need {size} bytes of array data at offset {self.pos}, have {len(self.buf) - self.pos}")
        out = np.frombuffer(self.buf, dtype=dt, count=count, offset=self.pos).astype(dt.newbyteorder("="))
        self.pos += size
        return out

    def finish(self) -> None:
        if self.pos != len(self.buf):
            raise FormatError(f"{len(self.buf) - self.pos} trailing bytes")


def le_bytes(a: np.ndarray, dtype: str) -> bytes:
    return np.ascontiguousarray(a, dtype=np.dtype(dtype).newbyteorder("<")).tobytes()
