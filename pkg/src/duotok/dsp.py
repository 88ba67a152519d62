"""Spectral front end: STFT, Mel filterbank, log-Mel, chroma and Mel L1."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import DataError

__all__ = [
    "Waveform",
    "StftConfig",
    "ComplexSpectrogram",
    "stft",
    "hz_to_mel",
    "mel_to_hz",
    "mel_filterbank",
    "mel_spectrogram",
    "log_mel",
    "chroma",
    "mel_l1",
]

DEFAULT_SAMPLE_RATE = 24000
DEFAULT_N_MELS = 128
DEFAULT_EPS = 1e-5
A4 = 440.0


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or s.size == 0:
            raise DataError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(s)):
            raise DataError("waveform contains non-finite samples")
        if not self.sample_rate > 0:
            raise DataError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", s)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class StftConfig:
    """STFT analysis settings.

    The default (1024-point FFT, hop 240 at 24 kHz) gives 100 frames per
    second, an integer multiple of the 25 Hz token rate.
    """

    fft_size: int = 1024
    hop: int = 240
    center_pad: bool = True

    def __post_init__(self):
        n = self.fft_size
        if n < 2 or n & (n - 1):
            raise ValueError(f"fft_size must be a power of two, got {n}")
        if not 0 < self.hop <= n:
            raise ValueError(f"hop must be in (0, fft_size], got {self.hop}")

    def window(self) -> np.ndarray:
        # periodic Hann
        return scipy.signal.get_window("hann", self.fft_size, fftbins=True)

    def n_frames(self, n_samples: int) -> int:
        if self.center_pad:
            return 1 + n_samples // self.hop
        return 1 + max(0, n_samples - self.fft_size + self.hop - 1) // self.hop


@dataclass(frozen=True)
class ComplexSpectrogram:
    """U frames x F bins of complex STFT values."""

    values: np.ndarray
    frame_rate: float
    sample_rate: int
    fft_size: int

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    def frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.sample_rate / self.fft_size


def _frames(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    n = cfg.fft_size
    U = cfg.n_frames(x.size)
    if cfg.center_pad:
        pad = n // 2
        mode = "reflect" if x.size > pad else "constant"
        x = np.pad(x, pad, mode=mode)
    need = (U - 1) * cfg.hop + n
    if x.size < need:
        x = np.pad(x, (0, need - x.size))
    idx = np.arange(n)[None, :] + cfg.hop * np.arange(U)[:, None]
    return x[idx]


def stft(w: Waveform, cfg: StftConfig = StftConfig()) -> ComplexSpectrogram:
    """Hann-windowed short-time Fourier transform.

    Returns a ``U x (fft_size/2 + 1)`` complex matrix. With ``center_pad``
    the signal is reflection-padded by ``fft_size // 2`` on both sides, so
    frame ``u`` is centred on sample ``u * hop``.
    """
    frames = _frames(w.samples, cfg) * cfg.window()[None, :]
    X = np.fft.rfft(frames, n=cfg.fft_size, axis=1)
    return ComplexSpectrogram(X, w.sample_rate / cfg.hop, w.sample_rate, cfg.fft_size)


# Slaney mel scale: linear below 1 kHz, logarithmic above.
_F_SP = 200.0 / 3
_MIN_LOG_HZ = 1000.0
_MIN_LOG_MEL = _MIN_LOG_HZ / _F_SP
_LOGSTEP = np.log(6.4) / 27.0


def hz_to_mel(f):
    f = np.asarray(f, dtype=np.float64)
    lin = f / _F_SP
    log = _MIN_LOG_MEL + np.log(np.maximum(f, _MIN_LOG_HZ) / _MIN_LOG_HZ) / _LOGSTEP
    return np.where(f >= _MIN_LOG_HZ, log, lin)


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    lin = _F_SP * m
    log = _MIN_LOG_HZ * np.exp(_LOGSTEP * (np.maximum(m, _MIN_LOG_MEL) - _MIN_LOG_MEL))
    return np.where(m >= _MIN_LOG_MEL, log, lin)


def mel_filterbank(sample_rate, fft_size, n_mels=DEFAULT_N_MELS, fmin=0.0, fmax=None) -> np.ndarray:
    """Triangular filters with unit peak, evenly spaced on the Slaney mel scale.

    Raises:
        ValueError: if the band is invalid or too narrow, i.e. some filter
            covers no FFT bin.
    """
    if fmax is None:
        fmax = sample_rate / 2
    if not 0 <= fmin < fmax <= sample_rate / 2:
        raise ValueError(f"need 0 <= fmin < fmax <= nyquist, got fmin={fmin}, fmax={fmax}")
    if n_mels < 1:
        raise ValueError("n_mels must be >= 1")
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(~np.any(fb > 0, axis=1))
    if empty.size:
        raise ValueError(f"band too narrow for {n_mels} mels: filters {empty.tolist()} cover no FFT bin")
    return fb


def mel_spectrogram(spec: ComplexSpectrogram, fb: np.ndarray) -> np.ndarray:
    """U x n_mels Mel magnitudes, ``fb @ |X|`` per frame."""
    if fb.shape[1] != spec.n_bins:
        raise ValueError(f"filterbank has {fb.shape[1]} columns, spectrogram has {spec.n_bins} bins")
    return np.abs(spec.values) @ fb.T


def log_mel(spec: ComplexSpectrogram, fb: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return np.log(mel_spectrogram(spec, fb) + eps)


def pitch_classes(freqs: np.ndarray, ref_freq: float = A4) -> np.ndarray:
    """Pitch class (C=0 ... B=11) of each frequency by nearest semitone; -1 for DC."""
    out = np.full(freqs.shape, -1, dtype=np.int64)
    pos = freqs > 0
    semis = np.rint(12 * np.log2(freqs[pos] / ref_freq)).astype(np.int64)
    out[pos] = (semis + 9) % 12  # the reference is A
    return out


def chroma(spec: ComplexSpectrogram, ref_freq: float = A4) -> np.ndarray:
    """12-bin chromagram from STFT power, L2-normalised per frame.

    Silent frames stay all-zero rather than becoming uniform.
    """
    if not ref_freq > 0:
        raise ValueError(f"ref_freq must be positive, got {ref_freq}")
    power = np.abs(spec.values) ** 2
    pcs = pitch_classes(spec.frequencies(), ref_freq)
    fold = np.zeros((spec.n_bins, 12))
    keep = pcs >= 0
    fold[np.flatnonzero(keep), pcs[keep]] = 1.0
    C = power @ fold
    norms = np.linalg.norm(C, axis=1, keepdims=True)
    return np.divide(C, norms, out=np.zeros_like(C), where=norms > 0)


def mel_l1(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))
