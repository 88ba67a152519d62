"""Dual-track token containers, bitrate arithmetic and the ``DTOK`` format.

``DTOK`` layout (little-endian): magic, version u16, track count u8, then per
track: route u8, K u32, rate f32, length u64, ``length`` x u32 indices.
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._binio import VERSION, Reader, le_bytes
from .errors import DataError, FormatError
from .simvq import Route

MAGIC = b"DTOK"


@dataclass(frozen=True)
class TrackTokens:
    route: Route
    vocab_size: int
    rate: float
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if self.vocab_size < 2:
            raise DataError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if not self.rate > 0:
            raise DataError(f"token rate must be positive, got {self.rate}")
        if idx.size and (idx.min() < 0 or idx.max() >= self.vocab_size):
            raise DataError(f"token index outside [0, {self.vocab_size})")
        object.__setattr__(self, "route", Route(self.route))
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.indices.size

    def __eq__(self, other):
        if not isinstance(other, TrackTokens):
            return NotImplemented
        return (self.route == other.route and self.vocab_size == other.vocab_size
                and self.rate == other.rate and np.array_equal(self.indices, other.indices))


@dataclass(frozen=True, eq=True)
class DualTrackSequence:
    vocal: TrackTokens
    accomp: TrackTokens
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.vocal.route is not Route.VOCAL or self.accomp.route is not Route.ACCOMP:
            raise DataError("vocal/accomp fields carry the wrong routes")
        if len(self.vocal) != len(self.accomp):
            raise DataError(f"track lengths differ: vocal {len(self.vocal)} vs accomp {len(self.accomp)}")
        if self.vocal.rate != self.accomp.rate:
            raise DataError(f"track rates differ: vocal {self.vocal.rate} vs accomp {self.accomp.rate}")

    def __len__(self) -> int:
        return len(self.vocal)

    def __getitem__(self, route: Route) -> TrackTokens:
        return self.vocal if Route(route) is Route.VOCAL else self.accomp


def align(vocal: TrackTokens, accomp: TrackTokens, name: str = "") -> DualTrackSequence:
    return DualTrackSequence(vocal, accomp, name)


def bitrate_kbps(rate: float, codebook_sizes) -> float:
    """Bits per second / 1000 for ``rate`` frames/s, each carrying one index per codebook."""
    sizes = list(codebook_sizes)
    if any(k < 2 for k in sizes):
        raise ValueError("codebook sizes must be >= 2")
    return rate * sum(math.log2(k) for k in sizes) / 1000


def tracks_to_bytes(tracks) -> bytes:
    tracks = list(tracks)
    if len(tracks) > 255:
        raise ValueError("at most 255 tracks")
    out = [MAGIC, struct.pack("<HB", VERSION, len(tracks))]
    for tr in tracks:
        out.append(struct.pack("<BIfQ", int(tr.route), tr.vocab_size, tr.rate, len(tr)))
        out.append(le_bytes(tr.indices, "u4"))
    return b"".join(out)


def tracks_from_bytes(buf: bytes) -> list[TrackTokens]:
    r = Reader(buf, MAGIC)
    r.version()
    n = r.unpack("B")
    tracks = []
    for _ in range(n):
        route, K, rate, length = r.unpack("BIfQ")
        if route not in (0, 1):
            raise FormatError(f"unknown route id {route}")
        idx = r.array("u4", length)
        if length and int(idx.max()) >= K:
            raise FormatError(f"index {int(idx.max())} >= declared K={K}")
        tracks.append(TrackTokens(Route(route), K, float(rate), idx))
    r.finish()
    return tracks


def serialize(seq: DualTrackSequence) -> bytes:
    return tracks_to_bytes([seq.vocal, seq.accomp])


def deserialize(buf: bytes) -> DualTrackSequence:
    tracks = tracks_from_bytes(buf)
    if [t.route for t in tracks] != [Route.VOCAL, Route.ACCOMP]:
        raise FormatError("expected exactly a vocal track followed by an accompaniment track")
    return DualTrackSequence(*tracks)


def save(path, seq) -> None:
    data = serialize(seq) if isinstance(seq, DualTrackSequence) else tracks_to_bytes(seq)
    Path(path).write_bytes(data)


def load(path) -> DualTrackSequence:
    seq = deserialize(Path(path).read_bytes())
    return DualTrackSequence(seq.vocal, seq.accomp, Path(path).stem)


def to_csv(seq: DualTrackSequence) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "vocal_idx", "accomp_idx"])
    for t, (v, a) in enumerate(zip(seq.vocal.indices, seq.accomp.indices)):
        w.writerow([t, int(v), int(a)])
    return buf.getvalue()


@dataclass(frozen=True)
class CodecEntry:
    name: str
    token_rate: float
    codebook_sizes: tuple[int, ...]
    bitrate_kbps: float
    ppl_at_1024: float
    mel_l1: float | None


# Published operating points of common codecs and of the dual-codebook
# tokenizer (mel_l1 left empty where it is reported per stem only).
REFERENCE_CODECS = (
    CodecEntry("DAC", 75, (1024,) * 8, 6.00, 194.0, 0.73),
    CodecEntry("Encodec", 75, (1024,) * 8, 6.00, 141.3, 0.78),
    CodecEntry("SemantiCodec", 100, (8192,) * 2, 1.30, 15.5, 0.98),
    CodecEntry("WavTokenizer", 40, (4096,), 0.48, 38.2, 1.15),
    CodecEntry("X-Codec", 50, (1024,) * 8, 4.00, 47.5, 0.91),
    CodecEntry("YuE tokenizer", 50, (1024,) * 8, 4.00, 46.2, 0.90),
    CodecEntry("MuCodec-LeVo", 25, (16384,) * 2, 0.70, 8.10, 1.37),
    CodecEntry("Duo-Tok", 25, (32768,) * 2, 0.75, 4.75, None),
)
