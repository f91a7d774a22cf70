"""Per-stroke DFT magnitude features and class template spectra.

Each stroke is windowed from 30 ms before its onset to 30 ms before the
next onset, zero-padded to 48,000 samples (1 Hz bins at 48 kHz), and the
magnitudes of bins 0..11,999 (0-12 kHz) form the feature vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import NUM_CLASSES, AudioClip, StrokeLabel

DFT_SIZE = 48000
FEATURE_DIM = 12000
PRE_ONSET = 0.03
LAST_STROKE_SPAN = 1.0


@dataclass(frozen=True)
class TemplateSet:
    templates: np.ndarray  # (6, dim)
    counts: np.ndarray  # (6,)

    def __post_init__(self):
        if self.templates.shape[0] != NUM_CLASSES or len(self.counts) != NUM_CLASSES:
            raise ValueError("a template set needs one template per stroke class")


def stroke_window(clip: AudioClip, onset: float, next_onset: float | None = None) -> tuple[int, int]:
    """Sample range ``[start, stop)`` analysed for a stroke."""
    sr = clip.sample_rate
    if next_onset is not None and next_onset <= onset:
        raise ValueError(f"empty window: next onset {next_onset} is not after onset {onset}")
    raw_start = int(round((onset - PRE_ONSET) * sr))
    if next_onset is None:
        raw_stop = raw_start + int(round(LAST_STROKE_SPAN * sr))
    else:
        raw_stop = int(round((next_onset - PRE_ONSET) * sr))
    start = max(0, raw_start)
    stop = min(raw_stop, len(clip), start + DFT_SIZE)
    if stop <= start:
        raise ValueError(f"empty window for onset {onset:.6f}s")
    return start, stop


def extract_stroke_spectrum(
    clip: AudioClip,
    onset: float,
    next_onset: float | None = None,
    full: bool = False,
    normalize: bool = False,
) -> np.ndarray:
    """Feature vector for the stroke at ``onset``.

    ``full=True`` returns all 48,000 magnitudes (debug / Parseval checks)
    instead of the 12,000-bin slice.  ``normalize=True`` scales the vector
    to unit maximum.
    """
    start, stop = stroke_window(clip, onset, next_onset)
    segment = clip.samples[start:stop]
    if full:
        mags = np.abs(np.fft.fft(segment, n=DFT_SIZE))
    else:
        mags = np.abs(np.fft.rfft(segment, n=DFT_SIZE)[:FEATURE_DIM])
    if normalize:
        peak = mags.max()
        if peak > 0:
            mags = mags / peak
    return mags


def extract_all(clip: AudioClip, onsets, normalize: bool = False) -> list[np.ndarray]:
    onsets = list(onsets)
    if any(b < a for a, b in zip(onsets, onsets[1:])):
        raise ValueError("onsets must be sorted ascending")
    nexts = onsets[1:] + [None]
    return [extract_stroke_spectrum(clip, t, n, normalize=normalize) for t, n in zip(onsets, nexts)]


def decimate_spectrum(features, n_bins: int) -> np.ndarray:
    """Average adjacent bins so the last axis has ``n_bins`` entries."""
    features = np.asarray(features)
    dim = features.shape[-1]
    if n_bins == dim:
        return features
    if n_bins <= 0 or dim % n_bins:
        raise ValueError(f"cannot decimate {dim} bins to {n_bins}")
    return features.reshape(*features.shape[:-1], n_bins, dim // n_bins).mean(axis=-1)


def compute_templates(features, labels) -> TemplateSet:
    """Per-class mean spectrum."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray([int(label) for label in labels])
    if len(features) != len(labels):
        raise ValueError("features and labels differ in length")
    counts = np.bincount(labels, minlength=NUM_CLASSES)
    if np.any(counts == 0):
        missing = [StrokeLabel(c).text for c in range(NUM_CLASSES) if counts[c] == 0]
        raise ValueError(f"no examples for class {', '.join(missing)}")
    templates = np.stack([features[labels == c].mean(axis=0) for c in range(NUM_CLASSES)])
    return TemplateSet(templates, counts)
