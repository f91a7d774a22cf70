"""Pitch-shift augmentation by resampling.

Shifting by ``s`` semitones resamples the clip so every component at
``f`` Hz lands on ``f * 2**(s/12)`` while the nominal sample rate stays
the same.  Duration shrinks by the same factor, so annotation times are
scaled by ``2**(-s/12)``.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import resample

from .evaluation import match_onsets
from .features import FEATURE_DIM, decimate_spectrum, extract_all
from .onset import OnsetConfig, detect_onsets
from .types import Annotation, AudioClip, LabeledDataset, Recording

MAX_SHIFT = 12


def rate_factor(semitones: int) -> float:
    return 2.0 ** (semitones / 12.0)


def pitch_shift(clip: AudioClip, semitones: int) -> AudioClip:
    if abs(semitones) > MAX_SHIFT:
        raise ValueError(f"shift of {semitones} semitones exceeds +/-{MAX_SHIFT}")
    if semitones == 0:
        return clip
    n_out = int(round(len(clip) / rate_factor(semitones)))
    # band-limited (FFT) resampling to an arbitrary length
    shifted = resample(clip.samples, n_out)
    return AudioClip(shifted, clip.sample_rate)


def scale_annotations(annotations, semitones: int) -> list[Annotation]:
    factor = 2.0 ** (-semitones / 12.0)
    if semitones == 0:
        return list(annotations)
    return [Annotation(a.onset * factor, a.label) for a in annotations]


def shift_recording(recording: Recording, semitones: int) -> Recording:
    return Recording(
        recording.name,
        pitch_shift(recording.clip, semitones),
        tuple(scale_annotations(recording.annotations, semitones)),
    )


def dataset_from_recording(
    recording: Recording,
    n_bins: int = FEATURE_DIM,
    detect: bool = False,
    onset_config: OnsetConfig | None = None,
    normalize: bool = False,
) -> LabeledDataset:
    """Feature rows for every stroke of a recording.

    With ``detect=False`` the annotation times serve as onsets.  With
    ``detect=True`` onsets come from the detector; each detection matched
    to an annotation (15 ms tolerance) takes that annotation's label and
    unmatched detections are dropped.
    """
    truth = [a.onset for a in recording.annotations]
    labels = [int(a.label) for a in recording.annotations]
    if detect:
        onsets = detect_onsets(recording.clip, onset_config)
        report = match_onsets(onsets, truth)
        keep = sorted(report.pairs, key=lambda p: p[1])
        rows = [j for _, j in keep]
        labels = [labels[i] for i, _ in keep]
    else:
        onsets = truth
        rows = list(range(len(onsets)))
    if not rows:
        return LabeledDataset(np.zeros((0, n_bins), np.float32), np.zeros(0, np.int64))
    vectors = extract_all(recording.clip, onsets, normalize=normalize)
    feats = decimate_spectrum(np.stack([vectors[j] for j in rows]), n_bins)
    return LabeledDataset(feats, labels, [recording.name] * len(rows))


def build_augmented_dataset(recordings, shifts, **kwargs) -> LabeledDataset:
    """Pool features over every (recording, shift) pair.

    Keyword arguments are passed to :func:`dataset_from_recording`.
    """
    shifts = list(shifts)
    if len(set(shifts)) != len(shifts):
        raise ValueError(f"duplicate shifts in {shifts}")
    parts = [
        dataset_from_recording(shift_recording(rec, s), **kwargs)
        for rec in recordings
        for s in sorted(shifts)
    ]
    return LabeledDataset.concat(parts)
