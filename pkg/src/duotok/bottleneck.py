"""Gaussian replacement at the pre-quantization layer and a toy stand-in encoder.

Each frame draws from its own generator keyed by ``(seed, frame index)``,
so the noise for frame ``t`` does not depend on how many frames precede it
in a batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .features import FeatureSequence

__all__ = [
    "FeatureSequence",
    "ReplacementConfig",
    "ToyEncoder",
    "gaussian_replace",
    "init_toy_encoder",
    "replacement_fraction",
    "toy_encode",
]


@dataclass(frozen=True)
class ReplacementConfig:
    p: float = 0.2
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def _frame_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t,)))


def gaussian_replace(h: FeatureSequence, cfg: ReplacementConfig, training: bool = True):
    """Replace whole frames with N(0, sigma^2 I) draws with probability ``p``.

    Returns ``(h_tilde, m)`` where ``m`` flags replaced frames. Frames with
    ``m[t] == False`` are returned bit-identical. With ``training=False``
    the input passes through untouched.
    """
    U, d = h.values.shape
    m = np.zeros(U, dtype=bool)
    if not training or cfg.p == 0:
        return h, m
    out = h.values.copy()
    for t in range(U):
        rng = _frame_rng(cfg.seed, t)
        # the Bernoulli draw comes first so the mask does not depend on d
        if rng.random() < cfg.p:
            m[t] = True
            out[t] = cfg.sigma * rng.standard_normal(d)
    return FeatureSequence(out, h.frame_rate), m


def replacement_fraction(m) -> float:
    m = np.asarray(m, dtype=bool)
    if m.size == 0:
        raise ValueError("empty mask")
    return float(m.sum() / m.size)


@dataclass(frozen=True)
class ToyEncoder:
    """Per-frame affine map ``x @ weight + bias``."""

    weight: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)
    seed: int | None = None

    @property
    def d_in(self) -> int:
        return self.weight.shape[0]

    @property
    def d_out(self) -> int:
        return self.weight.shape[1]


def init_toy_encoder(seed: int, d_in: int, d_out: int) -> ToyEncoder:
    rng = np.random.default_rng(seed)
    weight = rng.standard_normal((d_in, d_out)) / np.sqrt(d_in)
    bias = 0.1 * rng.standard_normal(d_out)
    weight.flags.writeable = False
    bias.flags.writeable = False
    return ToyEncoder(weight, bias, seed)


def toy_encode(w_features: np.ndarray, enc: ToyEncoder, frame_rate: float = 25.0) -> FeatureSequence:
    x = np.asarray(w_features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != enc.d_in:
        raise DataError(f"expected U x {enc.d_in} input, got shape {x.shape}")
    return FeatureSequence(x @ enc.weight + enc.bias, frame_rate)
