"""Frozen random-projection quantizer, span masking and the masked-frame loss.

Targets are produced by projecting each feature frame with a fixed random
matrix, L2-normalising, and taking the nearest row of a fixed random
unit-norm codebook. Nothing here is ever trained.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._binio import VERSION, Reader
from .errors import DataError
from .features import FeatureSequence

MAGIC = b"DTRQ"

DEFAULT_MASK_RATIO = 0.4
DEFAULT_SPAN = 4


@dataclass(frozen=True)
class RandomQuantizer:
    seed: int
    d_in: int
    d_proj: int
    K: int
    projection: np.ndarray = field(repr=False, compare=False)
    codebook: np.ndarray = field(repr=False, compare=False)


def init_random_quantizer(seed: int, d_in: int, d_proj: int = 16, K: int = 8192) -> RandomQuantizer:
    if min(d_in, d_proj, K) <= 0:
        raise ValueError("d_in, d_proj and K must be positive")
    if K < 2:
        raise ValueError(f"codebook needs at least 2 entries, got K={K}")
    rng = np.random.default_rng(seed)
    projection = rng.standard_normal((d_in, d_proj))
    codebook = rng.standard_normal((K, d_proj))
    codebook /= np.linalg.norm(codebook, axis=1, keepdims=True)
    projection.flags.writeable = False
    codebook.flags.writeable = False
    return RandomQuantizer(seed, d_in, d_proj, K, projection, codebook)


def nearest_rows(x: np.ndarray, table: np.ndarray, chunk_elems: int = 1 << 22) -> np.ndarray:
    """Index of the nearest ``table`` row (squared Euclidean) for each row of ``x``.

    Distances are computed as explicit differences, not the ``|a|^2 - 2ab + |b|^2``
    expansion, so exact ties resolve to the lowest index.
    """
    U = x.shape[0]
    out = np.empty(U, dtype=np.int64)
    step = max(1, chunk_elems // max(1, table.size))
    for s in range(0, U, step):
        diff = x[s : s + step, None, :] - table[None, :, :]
        out[s : s + step] = np.argmin(np.einsum("ukd,ukd->uk", diff, diff), axis=1)
    return out


def assign_targets(features: FeatureSequence, rq: RandomQuantizer) -> np.ndarray:
    """Target index for every frame.

    A frame whose projection has zero norm is matched by unnormalised
    distance instead.
    """
    x = features.values
    if x.shape[1] != rq.d_in:
        raise DataError(f"feature dim {x.shape[1]} != quantizer d_in {rq.d_in}")
    z = x @ rq.projection
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    z = np.divide(z, norms, out=z.copy(), where=norms > 0)
    return nearest_rows(z, rq.codebook)


@dataclass(frozen=True)
class MaskPlan:
    flags: np.ndarray
    span_len: int
    target_ratio: float

    @property
    def masked_fraction(self) -> float:
        return float(self.flags.mean())


def sample_mask(U: int, ratio: float = DEFAULT_MASK_RATIO, span_len: int = DEFAULT_SPAN, seed: int = 0) -> MaskPlan:
    """Seeded time mask made of non-overlapping spans of ``span_len`` frames.

    ``n = round(ratio * U / span_len)`` spans are laid out by drawing sorted
    offsets into the ``U - n * span_len`` unmasked frames (adjacent spans may
    touch), so the masked count is ``n * span_len``, within half a span of
    ``ratio * U``.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    if span_len < 1 or U < span_len:
        raise ValueError(f"need 1 <= span_len <= U, got span_len={span_len}, U={U}")
    if ratio * U < 1:
        raise ValueError(f"infeasible mask: ratio * U = {ratio * U} < 1 frame")
    n = max(1, int(round(ratio * U / span_len)))
    n = min(n, U // span_len)
    free = U - n * span_len
    rng = np.random.default_rng(seed)
    offsets = np.sort(rng.integers(0, free + 1, size=n))
    starts = offsets + span_len * np.arange(n)
    flags = np.zeros(U, dtype=bool)
    for s in starts:
        flags[s : s + span_len] = True
    return MaskPlan(flags, span_len, ratio)


def mlm_loss(log_probs: np.ndarray, targets: np.ndarray, plan: MaskPlan, reduction: str = "sum") -> float:
    """Negative log-likelihood of the targets over masked frames only.

    ``reduction="sum"`` is the plain sum over masked frames; ``"mean"``
    divides by the number of masked frames.
    """
    log_probs = np.asarray(log_probs, dtype=np.float64)
    targets = np.asarray(targets)
    U, K = log_probs.shape
    if targets.shape != (U,) or plan.flags.shape != (U,):
        raise ValueError("log_probs, targets and mask must agree on U")
    if np.any(np.abs(np.exp(log_probs).sum(axis=1) - 1) > 1e-6):
        raise ValueError("log_probs rows are not normalised")
    if np.any((targets < 0) | (targets >= K)):
        raise ValueError(f"target index out of range [0, {K})")
    rows = np.flatnonzero(plan.flags)
    total = -float(np.sum(log_probs[rows, targets[rows]]))
    if reduction == "sum":
        return total
    if reduction == "mean":
        return total / max(1, rows.size)
    raise ValueError(f"unknown reduction {reduction!r}")


def save_quantizer(path, rq: RandomQuantizer) -> None:
    Path(path).write_bytes(MAGIC + struct.pack("<HQIII", VERSION, rq.seed, rq.d_in, rq.d_proj, rq.K))


def quantizer_from_bytes(buf: bytes) -> RandomQuantizer:
    r = Reader(buf, MAGIC)
    r.version()
    seed, d_in, d_proj, K = r.unpack("QIII")
    r.finish()
    return init_random_quantizer(seed, d_in, d_proj, K)


def load_quantizer(path) -> RandomQuantizer:
    return quantizer_from_bytes(Path(path).read_bytes())
