"""Core value types shared across the transcription pipeline."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

SAMPLE_RATE = 48000


class StrokeLabel(enum.IntEnum):
    """Reduced mridangam stroke vocabulary.

    The integer value is the canonical class index used everywhere a label
    is stored as a number (feature caches, network outputs, confusion
    matrices).
    """

    LO = 0
    HI = 1
    MID1 = 2
    MID2 = 3
    MID3 = 4
    COMPOSITE = 5

    @property
    def text(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "StrokeLabel":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown stroke label {text.strip()!r}") from None


NUM_CLASSES = len(StrokeLabel)
LABEL_NAMES = [label.text for label in StrokeLabel]


@dataclass(frozen=True)
class AudioClip:
    """Mono sample buffer. ``samples`` is a float64 array in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioClip samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioClip samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True, order=True)
class Annotation:
    onset: float
    label: StrokeLabel

    def __post_init__(self):
        if self.onset < 0:
            raise ValueError(f"onset must be non-negative, got {self.onset}")
        object.__setattr__(self, "label", StrokeLabel(self.label))


@dataclass(frozen=True)
class Recording:
    """One composition: audio plus its (merged) annotations."""

    name: str
    clip: AudioClip
    annotations: tuple[Annotation, ...]


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with integer labels and a per-row group tag.

    ``groups`` holds the recording name each row came from so that
    held-out-composition splits can be made after pooling.
    """

    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray = field(default=None)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float32)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if len(features) != len(labels):
            raise ValueError("features and labels differ in length")
        if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
            raise ValueError("label index outside 0..5")
        groups = self.groups
        if groups is None:
            groups = np.full(len(labels), "", dtype=object)
        groups = np.asarray(groups, dtype=object)
        if len(groups) != len(labels):
            raise ValueError("groups and labels differ in length")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "groups", groups)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=NUM_CLASSES)

    def subset(self, index) -> "LabeledDataset":
        index = np.asarray(index, dtype=np.int64)
        return LabeledDataset(self.features[index], self.labels[index], self.groups[index])

    @classmethod
    def concat(cls, parts) -> "LabeledDataset":
        parts = list(parts)
        if not parts:
            raise ValueError("nothing to concatenate")
        return cls(
            np.concatenate([p.features for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.groups for p in parts]),
        )
