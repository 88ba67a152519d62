"""Dual-codebook SimVQ with hard vocal/accompaniment routing.

Each route owns a frozen codebook ``C`` (K x d) and a learnable basis ``W``
(d x d). Quantization searches the effective codebook ``C @ W``; training
updates ``W`` only, with AdamW under a warmup-cosine schedule.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from ._binio import VERSION, Reader, le_bytes
from .bestrq import nearest_rows
from .errors import DataError, FormatError
from .features import FeatureSequence

MAGIC = b"DTCB"

DEFAULT_BETA = 0.25


class Route(enum.IntEnum):
    VOCAL = 0
    ACCOMP = 1

    @classmethod
    def parse(cls, s: str) -> "Route":
        key = s.strip().lower()
        aliases = {"vocal": cls.VOCAL, "vocals": cls.VOCAL, "accomp": cls.ACCOMP,
                   "accompaniment": cls.ACCOMP, "instr": cls.ACCOMP}
        if key not in aliases:
            raise ValueError(f"unknown route {s!r}")
        return aliases[key]

    @property
    def label(self) -> str:
        return "vocal" if self is Route.VOCAL else "accomp"


@dataclass
class Codebook:
    C: np.ndarray
    W: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.C = np.array(self.C, dtype=np.float64)
        self.C.flags.writeable = False
        self.W = np.array(self.W, dtype=np.float64)
        K, d = self.C.shape
        if self.W.shape != (d, d):
            raise DataError(f"W must be {d} x {d}, got {self.W.shape}")
        if not (np.all(np.isfinite(self.C)) and np.all(np.isfinite(self.W))):
            raise DataError("codebook contains non-finite values")

    @property
    def K(self) -> int:
        return self.C.shape[0]

    @property
    def d(self) -> int:
        return self.C.shape[1]


def init_codebook(K: int, d: int, seed: int) -> Codebook:
    """Standard-normal frozen codes, ``W`` starts at the identity."""
    rng = np.random.default_rng(seed)
    return Codebook(rng.standard_normal((K, d)), np.eye(d), seed)


@dataclass
class DualCodebookBank:
    vocal: Codebook
    accomp: Codebook

    def __post_init__(self):
        if self.vocal.C.shape != self.accomp.C.shape:
            raise DataError(f"codebook shapes differ: {self.vocal.C.shape} vs {self.accomp.C.shape}")

    @classmethod
    def create(cls, K: int, d: int, seed: int) -> "DualCodebookBank":
        # distinct child seeds so the two branches start from independent codes
        sv, sa = np.random.SeedSequence(seed).spawn(2)
        return cls(init_codebook(K, d, int(sv.generate_state(1)[0])),
                   init_codebook(K, d, int(sa.generate_state(1)[0])))

    @property
    def K(self) -> int:
        return self.vocal.K

    @property
    def d(self) -> int:
        return self.vocal.d

    def __getitem__(self, route: Route) -> Codebook:
        return self.vocal if Route(route) is Route.VOCAL else self.accomp


@dataclass(frozen=True)
class QuantizeResult:
    indices: np.ndarray
    quantized: np.ndarray
    codebook_term: float
    commitment_term: float


def effective_codebook(cb: Codebook) -> np.ndarray:
    return cb.C @ cb.W


def quantize(e: FeatureSequence, bank: DualCodebookBank, route: Route, beta: float = DEFAULT_BETA) -> QuantizeResult:
    """Nearest-neighbour quantization against the route's effective codebook.

    Both loss terms equal ``mean_t |e_t - q_t|^2``; they differ only in which
    side the stop-gradient blocks, which matters for :func:`vq_grad_w`.
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    if len(e) == 0:
        raise DataError("cannot quantize an empty sequence")
    cb = bank[route]
    if e.dim != cb.d:
        raise DataError(f"feature dim {e.dim} != code dim {cb.d}")
    table = effective_codebook(cb)
    idx = nearest_rows(e.values, table)
    q = table[idx]
    err = float(np.mean(np.sum((e.values - q) ** 2, axis=1)))
    return QuantizeResult(idx, q, err, err)


def vq_loss(res: QuantizeResult, beta: float = DEFAULT_BETA) -> float:
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    return res.codebook_term + beta * res.commitment_term


def vq_grad_w(e: FeatureSequence, cb: Codebook, assignments: np.ndarray) -> np.ndarray:
    """Gradient of ``mean_t |sg[e_t] - C[k_t] W|^2`` w.r.t. ``W`` at fixed assignments.

    The commitment term has its ``q`` stop-gradiented and adds nothing here.
    """
    a = np.asarray(assignments)
    if a.shape != (len(e),):
        raise DataError("one assignment per frame required")
    if np.any((a < 0) | (a >= cb.K)):
        raise DataError(f"stale assignment: index outside [0, {cb.K})")
    Ck = cb.C[a]
    resid = e.values - Ck @ cb.W
    return (-2.0 / len(e)) * Ck.T @ resid


@dataclass
class AdamWState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros_like(cls, W: np.ndarray) -> "AdamWState":
        return cls(np.zeros_like(W), np.zeros_like(W), 0)


def adamw_step(cb: Codebook, grad: np.ndarray, state: AdamWState, lr: float,
               beta1: float = 0.9, beta2: float = 0.96, weight_decay: float = 0.1, eps: float = 1e-8):
    """One AdamW update of ``cb.W`` in place; returns ``(W, state)``.

    Decay is decoupled: ``W -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * W)``.
    """
    if lr < 0:
        raise ValueError(f"lr must be >= 0, got {lr}")
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient")
    state.step += 1
    state.m = beta1 * state.m + (1 - beta1) * grad
    state.v = beta2 * state.v + (1 - beta2) * grad * grad
    m_hat = state.m / (1 - beta1**state.step)
    v_hat = state.v / (1 - beta2**state.step)
    cb.W = cb.W - lr * (m_hat / (np.sqrt(v_hat) + eps) + weight_decay * cb.W)
    return cb.W, state


@dataclass(frozen=True)
class ScheduleConfig:
    peak_lr: float
    warmup_steps: int
    cycle_steps: int

    def __post_init__(self):
        if self.warmup_steps < 1 or self.cycle_steps < 1:
            raise ValueError("warmup_steps and cycle_steps must be >= 1")


# Peak LR / warm-up / cosine cycle per training stage.
STAGE1_SCHEDULE = ScheduleConfig(3e-4, 5_000, 50_000)
STAGE2_SCHEDULE = ScheduleConfig(1e-4, 3_000, 80_000)
STAGE3_SCHEDULE = ScheduleConfig(1e-4, 3_000, 30_000)


def lr_at(step: int, sch: ScheduleConfig) -> float:
    """Linear warm-up to ``peak_lr``, then repeating cosine cycles."""
    if step < 0:
        raise ValueError("step must be >= 0")
    if step < sch.warmup_steps:
        return sch.peak_lr * step / sch.warmup_steps
    phase = ((step - sch.warmup_steps) % sch.cycle_steps) / sch.cycle_steps
    return sch.peak_lr * 0.5 * (1 + math.cos(2 * math.pi * phase))


def codebook_stats(indices, K: int) -> tuple[float, float]:
    """Utilization (distinct codes / K) and entropy in nats of code usage."""
    idx = np.asarray(indices)
    if idx.size == 0:
        raise ValueError("empty index sequence")
    if np.any((idx < 0) | (idx >= K)):
        raise ValueError(f"index outside [0, {K})")
    counts = np.bincount(idx, minlength=K)
    p = counts[counts > 0] / idx.size
    return float(np.count_nonzero(counts) / K), float(-np.sum(p * np.log(p)))


@dataclass
class TrainRecord:
    step: int
    route: Route
    lr: float
    vq_loss: float
    utilization: float
    entropy: float


@dataclass
class Trainer:
    """Owns a bank for the duration of training; one AdamW state per route."""

    bank: DualCodebookBank
    schedule: ScheduleConfig
    beta: float = DEFAULT_BETA
    beta1: float = 0.9
    beta2: float = 0.96
    weight_decay: float = 0.1
    eps: float = 1e-8
    step: int = 0
    states: dict = field(default_factory=dict)

    def __post_init__(self):
        for r in Route:
            self.states.setdefault(r, AdamWState.zeros_like(self.bank[r].W))

    def train_step(self, e: FeatureSequence, route: Route) -> TrainRecord:
        route = Route(route)
        cb = self.bank[route]
        res = quantize(e, self.bank, route, self.beta)
        loss = vq_loss(res, self.beta)
        util, ent = codebook_stats(res.indices, cb.K)
        lr = lr_at(self.step, self.schedule)
        grad = vq_grad_w(e, cb, res.indices)
        adamw_step(cb, grad, self.states[route], lr, self.beta1, self.beta2, self.weight_decay, self.eps)
        rec = TrainRecord(self.step, route, lr, loss, util, ent)
        self.step += 1
        return rec


def train_w(e_batches: Iterable[tuple[FeatureSequence, Route]], bank: DualCodebookBank,
            beta: float, sch: ScheduleConfig, steps: int, **adamw) -> list[TrainRecord]:
    """Run ``steps`` updates, one batch per step.

    Each record holds the loss and codebook statistics measured before that
    step's update. Only the codebook named by a batch's route is touched.
    """
    trainer = Trainer(bank, sch, beta, **adamw)
    it: Iterator = iter(e_batches)
    log = []
    for _ in range(steps):
        try:
            e, route = next(it)
        except StopIteration:
            break
        log.append(trainer.train_step(e, route))
    return log


def codebook_to_bytes(cb: Codebook) -> bytes:
    head = MAGIC + struct.pack("<HII", VERSION, cb.K, cb.d)
    return head + le_bytes(cb.C, "f8") + le_bytes(cb.W, "f8")


def codebook_from_bytes(buf: bytes) -> Codebook:
    r = Reader(buf, MAGIC)
    r.version()
    K, d = r.unpack("II")
    if K < 1 or d < 1:
        raise FormatError(f"invalid codebook shape K={K}, d={d}")
    C = r.array("f8", K * d).reshape(K, d)
    W = r.array("f8", d * d).reshape(d, d)
    r.finish()
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(W))):
        raise FormatError("codebook file contains non-finite values")
    return Codebook(C, W)


def save_codebook(path, cb: Codebook) -> None:
    Path(path).write_bytes(codebook_to_bytes(cb))


def load_codebook(path) -> Codebook:
    return codebook_from_bytes(Path(path).read_bytes())
