"""Objective library for the fine-tuning, discretization and decoder stages."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

SI_SNR_CAP_DB = 100.0
DEFAULT_STEMS = 4


# --- CTC ------------------------------------------------------------------

def _check_ctc(log_probs, y):
    lp = np.asarray(log_probs, dtype=np.float64)
    if lp.ndim != 2 or lp.shape[1] < 2:
        raise ValueError("log_probs must be U x (V+1) with V >= 1")
    V = lp.shape[1] - 1
    y = [int(t) for t in y]
    if not y:
        raise ValueError("target must contain at least one token")
    if any(t < 0 or t >= V for t in y):
        raise ValueError(f"token id outside [0, {V}); blank is id {V}")
    return lp, y, V


def ctc_min_frames(y) -> int:
    """Shortest input that can emit ``y``: one frame per token plus a blank between repeats."""
    return len(y) + sum(1 for a, b in zip(y, y[1:]) if a == b)


def ctc_loss(log_probs, y) -> float:
    """Negative log-probability of all alignments that collapse to ``y``.

    Blank is the last class. Log-space forward recursion over the
    blank-interleaved label sequence ``[b, y1, b, y2, ..., b]``. Returns
    ``inf`` when no alignment has non-zero probability (e.g. too few frames).
    """
    lp, y, V = _check_ctc(log_probs, y)
    U = lp.shape[0]
    if U < ctc_min_frames(y):
        return math.inf
    ext = np.full(2 * len(y) + 1, V)
    ext[1::2] = y
    S = ext.size
    # skip transition s-2 -> s allowed onto a label that differs from the label two back
    skip = np.zeros(S, dtype=bool)
    skip[3::2] = ext[3::2] != ext[1:-2:2]

    alpha = np.full(S, -np.inf)
    alpha[0] = lp[0, ext[0]]
    alpha[1] = lp[0, ext[1]]
    for u in range(1, U):
        prev = alpha
        stay = prev
        step = np.concatenate(([-np.inf], prev[:-1]))
        jump = np.where(skip, np.concatenate(([-np.inf, -np.inf], prev[:-2])), -np.inf)
        with np.errstate(invalid="ignore"):
            alpha = np.logaddexp(np.logaddexp(stay, step), jump) + lp[u, ext]
    total = np.logaddexp(alpha[-1], alpha[-2])
    return math.inf if total == -np.inf else -float(total)


def ctc_collapse(path, blank: int) -> tuple[int, ...]:
    """Merge repeats, then drop blanks."""
    out = []
    prev = None
    for p in path:
        if p != prev and p != blank:
            out.append(p)
        prev = p
    return tuple(out)


def ctc_brute_force(log_probs, y, max_paths: int = 10**7) -> float:
    """Reference CTC by enumerating every frame-level path."""
    lp, y, V = _check_ctc(log_probs, y)
    U, C = lp.shape
    if U > 8 or C**U > max_paths:
        raise ValueError(f"brute force guard: U={U}, {C}^{U} paths exceeds limit")
    target = tuple(y)
    terms = [
        sum(lp[u, p] for u, p in enumerate(path))
        for path in itertools.product(range(C), repeat=U)
        if ctc_collapse(path, V) == target
    ]
    if not terms:
        return math.inf
    total = logsumexp(terms)
    return math.inf if total == -np.inf else -float(total)


# --- spectral reconstruction ------------------------------------------------

def spectral_convergence(S_hat, S) -> float:
    S_hat = np.asarray(S_hat, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if S_hat.shape != S.shape:
        raise ValueError(f"shape mismatch: {S_hat.shape} vs {S.shape}")
    ref = np.linalg.norm(S)
    if ref == 0:
        raise ValueError("reference has zero Frobenius norm")
    return float(np.linalg.norm(S_hat - S) / ref)


def log_magnitude_loss(S_hat, S, eps: float = 1e-5, reduction: str = "mean") -> float:
    """L1 distance between ``log(S_hat + eps)`` and ``log(S + eps)``.

    ``reduction="mean"`` averages over entries; ``"sum"`` gives the plain L1 norm.
    """
    S_hat = np.asarray(S_hat, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if S_hat.shape != S.shape:
        raise ValueError(f"shape mismatch: {S_hat.shape} vs {S.shape}")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if np.any(S_hat < 0) or np.any(S < 0):
        raise ValueError("magnitudes must be non-negative")
    d = np.abs(np.log(S_hat + eps) - np.log(S + eps))
    if reduction == "mean":
        return float(d.mean())
    if reduction == "sum":
        return float(d.sum())
    raise ValueError(f"unknown reduction {reduction!r}")


# --- source-separation masks -----------------------------------------------

# One second of 100 Hz frames, 513 bins, 4 stems: a unit real error on
# every entry of that shape gives loss 1.
DEFAULT_KAPPA = 1.0 / (DEFAULT_STEMS * 513 * 100)


def mss_mask_loss(M_hat, M, kappa: float = DEFAULT_KAPPA) -> float:
    """``kappa * sum(|Re(M_hat - M)| + |Im(M_hat - M)|)`` over stems, bins, frames."""
    M_hat = np.asarray(M_hat)
    M = np.asarray(M)
    if M_hat.shape != M.shape:
        raise ValueError(f"shape mismatch: {M_hat.shape} vs {M.shape}")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    d = M_hat - M
    return float(kappa * (np.abs(d.real).sum() + np.abs(np.imag(d)).sum()))


def apply_mask(M_hat, X) -> np.ndarray:
    """Stem spectrum from a complex mask and the mixture spectrum (same layout)."""
    M_hat = np.asarray(M_hat)
    X = np.asarray(getattr(X, "values", X))
    if M_hat.shape != X.shape:
        raise ValueError(f"shape mismatch: {M_hat.shape} vs {X.shape}")
    return M_hat * X


# --- SI-SNR -----------------------------------------------------------------

def si_snr(y_hat, y, cap_db: float = SI_SNR_CAP_DB) -> float:
    """Scale-invariant SNR in dB, clipped to ``[-cap_db, cap_db]``.

    No mean removal is applied, so the value is not translation invariant.
    """
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if y_hat.shape != y.shape:
        raise ValueError(f"shape mismatch: {y_hat.shape} vs {y.shape}")
    ref = np.dot(y, y)
    if ref == 0:
        raise ValueError("reference signal has zero energy")
    proj = (np.dot(y_hat, y) / ref) * y
    p_sig = np.dot(proj, proj)
    p_res = np.dot(y_hat - proj, y_hat - proj)
    if p_res == 0:
        return cap_db if p_sig > 0 else -cap_db
    if p_sig == 0:
        return -cap_db
    return float(np.clip(10 * np.log10(p_sig / p_res), -cap_db, cap_db))


# --- diffusion --------------------------------------------------------------

@dataclass(frozen=True)
class DiffusionSchedule:
    alpha: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.float64)
        s = np.asarray(self.sigma, dtype=np.float64)
        if a.shape != s.shape or a.ndim != 1 or a.size == 0:
            raise ValueError("alpha and sigma must be equal-length 1-D arrays")
        if np.any(a < 0) or np.any(s < 0):
            raise ValueError("alpha and sigma must be non-negative")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "sigma", s)

    @property
    def T(self) -> int:
        return self.alpha.size

    @property
    def variance_preserving(self) -> bool:
        return bool(np.all(np.abs(self.alpha**2 + self.sigma**2 - 1) <= 1e-9))

    def at(self, t: int) -> tuple[float, float]:
        """(alpha_t, sigma_t) for 1-based timestep ``t``."""
        if not 1 <= t <= self.T:
            raise IndexError(f"timestep {t} outside [1, {self.T}]")
        return float(self.alpha[t - 1]), float(self.sigma[t - 1])


def cosine_schedule(T: int = 1000) -> DiffusionSchedule:
    t = np.arange(1, T + 1)
    return DiffusionSchedule(np.cos(np.pi * t / (2 * T)), np.sin(np.pi * t / (2 * T)))


def noise_latent(y, eps, t: int, sch: DiffusionSchedule) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if y.shape != eps.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {eps.shape}")
    a, s = sch.at(t)
    return a * y + s * eps


def v_target(y, eps, t: int, sch: DiffusionSchedule) -> np.ndarray:
    """Velocity ``alpha_t * eps - sigma_t * y``, the prediction that makes
    :func:`denoised_estimate` exact on a variance-preserving schedule."""
    a, s = sch.at(t)
    return a * np.asarray(eps, dtype=np.float64) - s * np.asarray(y, dtype=np.float64)


def denoised_estimate(z_t, pred, t: int, sch: DiffusionSchedule, prediction: str = "v") -> np.ndarray:
    """Clean-signal estimate from a noised latent and a network output.

    ``prediction="v"`` evaluates ``alpha_t * z_t - sigma_t * pred`` as written,
    which recovers ``y`` exactly when ``pred`` is the velocity.
    ``prediction="epsilon"`` instead inverts the noising for a noise
    prediction, ``(z_t - sigma_t * pred) / alpha_t``.
    """
    z_t = np.asarray(z_t, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if z_t.shape != pred.shape:
        raise ValueError(f"shape mismatch: {z_t.shape} vs {pred.shape}")
    a, s = sch.at(t)
    if prediction == "v":
        return a * z_t - s * pred
    if prediction == "epsilon":
        if a == 0:
            raise ValueError(f"alpha_{t} = 0: epsilon recovery undefined")
        return (z_t - s * pred) / a
    raise ValueError(f"unknown prediction type {prediction!r}")


def eps_loss(pred, eps) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if pred.shape != eps.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {eps.shape}")
    return float(np.mean((eps - pred) ** 2))


def si_improvement_loss(y_hat_t, z_t, y) -> float:
    """Negative SI-SNR gain of the estimate over the noisy input."""
    return -(si_snr(y_hat_t, y) - si_snr(z_t, y))


# --- stage combinators ------------------------------------------------------

@dataclass(frozen=True)
class StageWeights:
    lambda_ctc: float = 0.5
    lambda_mel: float = 1.0
    lambda_chr: float = 1.0
    lambda_mss: float = 1.0
    lambda_vq: float = 1.0
    lambda_si: float = 1.0

    def __post_init__(self):
        for k, v in vars(self).items():
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{k} must be finite and >= 0, got {v}")


def _components(*xs):
    for x in xs:
        if not (math.isfinite(x) and x >= 0):
            raise ValueError(f"loss components must be finite and >= 0, got {x}")


def stage2_objective(ctc, mel_sc, mel_mag, chr_sc, chr_mag, mss, w: StageWeights = StageWeights()) -> float:
    _components(ctc, mel_sc, mel_mag, chr_sc, chr_mag, mss)
    return (w.lambda_ctc * ctc + w.lambda_mel * (mel_sc + mel_mag)
            + w.lambda_chr * (chr_sc + chr_mag) + w.lambda_mss * mss)


def stage3_objective(mel_sc, mel_mag, chr_sc, chr_mag, vq, w: StageWeights = StageWeights()) -> float:
    _components(mel_sc, mel_mag, chr_sc, chr_mag, vq)
    return w.lambda_mel * (mel_sc + mel_mag) + w.lambda_chr * (chr_sc + chr_mag) + w.lambda_vq * vq


def diffusion_loss(eps_l, si_l, lambda_si: float = 1.0) -> float:
    if not lambda_si >= 0:
        raise ValueError("lambda_si must be >= 0")
    return eps_l + lambda_si * si_l
