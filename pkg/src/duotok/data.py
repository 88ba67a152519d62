"""Corpus preparation: lyric-aligned clip packing, sample-type mixing, WAV I/O."""
from __future__ import annotations

import enum
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import Waveform
from .errors import DataError

MIN_CLIP_S = 5.0
MAX_CLIP_S = 30.0


@dataclass(frozen=True)
class LyricSpan:
    start: float
    end: float
    text: str = ""

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise DataError(f"invalid span [{self.start}, {self.end})")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class ClipSpec:
    start: float
    end: float
    spans: tuple[int, ...]

    @property
    def duration(self) -> float:
        return self.end - self.start


def read_lyric_spans(path) -> list[LyricSpan]:
    """Parse ``start<TAB>end<TAB>text`` lines (UTF-8); blank lines are ignored."""
    spans = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t", 2)
        if len(parts) < 2:
            raise DataError(f"{path}:{n}: expected start<TAB>end<TAB>text")
        try:
            start, end = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}:{n}: {exc}") from None
        spans.append(LyricSpan(start, end, parts[2] if len(parts) > 2 else ""))
    return spans


def segment_by_lyrics(spans, track_len: float, min_len: float = MIN_CLIP_S, max_len: float = MAX_CLIP_S):
    """Greedily pack whole lyric spans into clips of ``min_len``..``max_len`` seconds.

    Spans are added left to right while the clip (first span start to last
    span end) stays within ``max_len``. A clip shorter than ``min_len`` is
    widened into the surrounding non-lyric audio, right side first; if there
    is not enough room its spans are skipped. A span longer than ``max_len``
    is always skipped.

    Returns:
        (clips, skipped): list of :class:`ClipSpec` and sorted list of skipped
        span indices.
    """
    spans = list(spans)
    for i in range(1, len(spans)):
        if spans[i].start < spans[i - 1].start:
            raise DataError(f"spans not sorted at index {i}")
        if spans[i].start < spans[i - 1].end:
            raise DataError(f"spans {i - 1} and {i} overlap")
    if spans and track_len < spans[-1].end:
        raise DataError(f"track length {track_len} shorter than last span end {spans[-1].end}")

    clips: list[ClipSpec] = []
    skipped: list[int] = []
    floor = 0.0  # nothing left of this point may be reused

    def emit(group):
        nonlocal floor
        start, end = spans[group[0]].start, spans[group[-1]].end
        need = min_len - (end - start)
        if need > 0:
            nxt = group[-1] + 1
            right_room = (spans[nxt].start if nxt < len(spans) else track_len) - end
            left_room = start - max(floor, spans[group[0] - 1].end if group[0] > 0 else 0.0)
            grow_r = min(need, right_room)
            grow_l = min(need - grow_r, left_room)
            if grow_r + grow_l < need - 1e-9:
                skipped.extend(group)
                return
            start, end = start - grow_l, end + grow_r
        clips.append(ClipSpec(start, end, tuple(group)))
        floor = end

    group: list[int] = []
    for i, sp in enumerate(spans):
        if sp.duration > max_len:
            if group:
                emit(group)
                group = []
            skipped.append(i)
            continue
        if group and sp.end - spans[group[0]].start > max_len:
            emit(group)
            group = []
        group.append(i)
    if group:
        emit(group)
    return clips, sorted(skipped)


class SampleType(enum.Enum):
    FULL_MIX = "full"
    LYRIC_VOCAL = "vocal"
    LYRIC_ACCOMP = "accomp"
    INSTR_ONLY = "instr"


@dataclass(frozen=True)
class MixRatios:
    full: float = 0.0
    vocal: float = 0.0
    accomp: float = 0.0
    instr: float = 0.0

    def __post_init__(self):
        w = self.weights()
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("mix weights must be finite and non-negative")

    def weights(self) -> np.ndarray:
        return np.array([self.full, self.vocal, self.accomp, self.instr], dtype=np.float64)

    def probabilities(self) -> np.ndarray:
        w = self.weights()
        if w.sum() == 0:
            raise ValueError("all mix weights are zero")
        return w / w.sum()


# full mixes are dropped for discretization by a zero weight
STAGE2_MIX = MixRatios(full=4, vocal=1, accomp=1, instr=1)
STAGE3_MIX = MixRatios(full=0, vocal=5, accomp=4, instr=1)


def ratio_sampler(r: MixRatios, seed: int, n: int) -> list[SampleType]:
    if n < 1:
        raise ValueError("n must be >= 1")
    p = r.probabilities()
    kinds = list(SampleType)
    draws = np.random.default_rng(seed).choice(len(kinds), size=n, p=p)
    return [kinds[i] for i in draws]


def load_wav(path) -> Waveform:
    """Read 16-bit PCM WAV as floats in [-1, 1); multichannel is averaged to mono."""
    try:
        with wave.open(str(path), "rb") as f:
            nch, width, rate, nframes = f.getnchannels(), f.getsampwidth(), f.getframerate(), f.getnframes()
            raw = f.readframes(nframes)
    except (wave.Error, EOFError) as exc:
        raise DataError(f"{path}: {exc}") from None
    if width != 2:
        raise DataError(f"{path}: only 16-bit PCM is supported, got {8 * width}-bit")
    x = np.frombuffer(raw, dtype="<i2")
    if x.size != nframes * nch:
        raise DataError(f"{path}: truncated sample data")
    x = x.reshape(-1, nch).astype(np.float64) / 32768.0
    return Waveform(x.mean(axis=1), rate)


def write_wav(path, samples, sample_rate: int) -> None:
    """Write mono or (n, channels) float samples as 16-bit PCM, clipping to range."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(x.shape[1])
        f.setsampwidth(2)
        f.setframerate(int(sample_rate))
        f.writeframes(pcm.tobytes())
