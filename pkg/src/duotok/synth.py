"""Seeded synthetic inputs for smoke runs and demos."""
from __future__ import annotations

import numpy as np

from .dsp import Waveform
from .features import FeatureSequence


def ring_centers(n_clusters: int = 8, radius: float = 3.0) -> np.ndarray:
    ang = 2 * np.pi * np.arange(n_clusters) / n_clusters
    return radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def clustered_features(seed: int, n_frames: int = 400, n_clusters: int = 8, radius: float = 3.0,
                       spread: float = 0.15, frame_rate: float = 25.0) -> FeatureSequence:
    """2-D frames scattered around ``n_clusters`` points on a circle."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_clusters, n_frames)
    x = ring_centers(n_clusters, radius)[labels] + spread * rng.standard_normal((n_frames, 2))
    return FeatureSequence(x, frame_rate)


def tone_sequence(freqs, seconds_each: float = 0.25, sample_rate: int = 24000, amp: float = 0.3) -> Waveform:
    """Concatenated sine tones with 5 ms raised-cosine fades."""
    n = int(round(seconds_each * sample_rate))
    t = np.arange(n) / sample_rate
    fade = min(n // 2, int(0.005 * sample_rate))
    env = np.ones(n)
    if fade:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(fade) / fade)
        env[:fade], env[n - fade:] = ramp, ramp[::-1]
    parts = [amp * env * np.sin(2 * np.pi * f * t) for f in freqs]
    return Waveform(np.concatenate(parts), sample_rate)
