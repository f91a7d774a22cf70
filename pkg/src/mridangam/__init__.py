"""Stroke transcription for solo mridangam recordings.

Pipeline: spectral-flux onset detection, per-stroke DFT magnitude
features, and a feedforward classifier trained with pitch-shift
augmentation for tonic invariance.
"""

from .types import (
    LABEL_NAMES,
    NUM_CLASSES,
    SAMPLE_RATE,
    Annotation,
    AudioClip,
    LabeledDataset,
    Recording,
    StrokeLabel,
)

__version__ = "0.1.0"

__all__ = [
    "LABEL_NAMES",
    "NUM_CLASSES",
    "SAMPLE_RATE",
    "Annotation",
    "AudioClip",
    "LabeledDataset",
    "Recording",
    "StrokeLabel",
]
