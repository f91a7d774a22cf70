"""Spectral-flux onset detection.

The onset strength envelope is the bin-averaged, half-wave rectified
frame-to-frame increase of the STFT magnitude.  Onsets are the envelope
peaks that survive a local-maximum / adaptive-threshold / refractory test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .types import AudioClip

_CHUNK = 1024  # frames per FFT batch


@dataclass(frozen=True)
class Spectrogram:
    frames: np.ndarray  # (n_frames, window // 2 + 1)
    frame_hop: int
    window_size: int
    sample_rate: int


@dataclass(frozen=True)
class OnsetEnvelope:
    values: np.ndarray
    frame_hop: int
    sample_rate: int


@dataclass(frozen=True)
class OnsetConfig:
    window: int = 2048
    hop: int = 480
    pre: int = 3
    post: int = 3
    delta_ratio: float = 0.07
    wait: int = 3


def stft_magnitude(clip: AudioClip, window: int = 2048, hop: int = 480) -> Spectrogram:
    """Hann-windowed magnitude STFT without padding."""
    if not window >= hop > 0:
        raise ValueError(f"need window >= hop > 0, got window={window}, hop={hop}")
    x = np.asarray(clip.samples, dtype=np.float64)
    if len(x) < window:
        raise ValueError(f"clip has {len(x)} samples, shorter than one {window}-sample window")
    frames = sliding_window_view(x, window)[::hop]
    taper = np.hanning(window)
    mags = np.empty((len(frames), window // 2 + 1))
    for start in range(0, len(frames), _CHUNK):
        block = frames[start:start + _CHUNK]
        mags[start:start + len(block)] = np.abs(np.fft.rfft(block * taper, axis=1))
    return Spectrogram(mags, hop, window, clip.sample_rate)


def onset_envelope(spec: Spectrogram) -> OnsetEnvelope:
    mags = spec.frames
    if len(mags) == 0:
        raise ValueError("spectrogram has no frames")
    values = np.zeros(len(mags))
    values[1:] = np.maximum(np.diff(mags, axis=0), 0.0).mean(axis=1)
    return OnsetEnvelope(values, spec.frame_hop, spec.sample_rate)


def pick_peaks(env, pre: int = 3, post: int = 3, delta: float | None = None, wait: int = 3) -> list[int]:
    """Indices of envelope peaks.

    A frame is kept when it is the strict maximum of ``[t-pre, t+post]``,
    exceeds the neighbourhood mean by ``delta`` (default: 7% of the
    envelope maximum) and lies at least ``wait`` frames after the last
    kept peak.
    """
    values = np.asarray(getattr(env, "values", env), dtype=np.float64)
    if delta is None:
        delta = 0.07 * values.max() if len(values) else 0.0
    peaks: list[int] = []
    n = len(values)
    for t in range(n):
        lo, hi = max(0, t - pre), min(n, t + post + 1)
        hood = values[lo:hi]
        v = values[t]
        if np.count_nonzero(hood >= v) != 1:
            continue
        if v < hood.mean() + delta:
            continue
        if peaks and t < peaks[-1] + wait:
            continue
        peaks.append(t)
    return peaks


def detect_onsets(clip: AudioClip, config: OnsetConfig | None = None) -> list[float]:
    """Onset times in seconds, ascending.

    The clip is zero-padded by half a window on both sides so frame ``t``
    is centred on sample ``t * hop``; a frame's time is then simply
    ``t * hop / sample_rate``.
    """
    config = config or OnsetConfig()
    half = config.window // 2
    padded = AudioClip(np.pad(clip.samples, (half, half)), clip.sample_rate)
    env = onset_envelope(stft_magnitude(padded, config.window, config.hop))
    delta = config.delta_ratio * env.values.max()
    peaks = pick_peaks(env, config.pre, config.post, delta, config.wait)
    duration = clip.duration
    return [min(t * config.hop / clip.sample_rate, duration) for t in peaks]
