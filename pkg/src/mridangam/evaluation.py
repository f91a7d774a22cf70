"""Onset matching and classification metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import LABEL_NAMES, NUM_CLASSES

ONSET_TOLERANCE = 0.015


@dataclass(frozen=True)
class OnsetMatchReport:
    matched: int
    false_positives: int
    missed: int
    mean_abs_offset: float
    pairs: tuple = ()  # (truth index, detection index)

    @property
    def truth_count(self) -> int:
        return self.matched + self.missed

    @property
    def detected_count(self) -> int:
        return self.matched + self.false_positives

    @property
    def accuracy(self) -> float:
        """Fraction of truth onsets detected (the headline onset score)."""
        return self.matched / self.truth_count if self.truth_count else 1.0

    @property
    def precision(self) -> float:
        return self.matched / self.detected_count if self.detected_count else 1.0

    @property
    def f_measure(self) -> float:
        p, r = self.precision, self.accuracy
        return 2 * p * r / (p + r) if p + r else 0.0


def _check_sorted(values, name):
    values = np.asarray(values, dtype=np.float64)
    if np.any(np.diff(values) < 0):
        raise ValueError(f"{name} onsets must be sorted ascending")
    return values


def match_onsets(detected, truth, tolerance: float = ONSET_TOLERANCE) -> OnsetMatchReport:
    """Greedy one-to-one matching in time order.

    Each truth onset, in ascending order, claims the nearest still-unused
    detection whose distance is strictly below ``tolerance``.
    """
    det = _check_sorted(detected, "detected")
    ref = _check_sorted(truth, "truth")
    used = np.zeros(len(det), dtype=bool)
    pairs = []
    offsets = []
    lo = 0
    for i, t in enumerate(ref):
        while lo < len(det) and det[lo] <= t - tolerance:
            lo += 1
        best, best_dist = -1, tolerance
        j = lo
        while j < len(det) and det[j] < t + tolerance:
            dist = abs(det[j] - t)
            if not used[j] and dist < best_dist:
                best, best_dist = j, dist
            j += 1
        if best >= 0:
            used[best] = True
            pairs.append((i, best))
            offsets.append(best_dist)
    matched = len(pairs)
    return OnsetMatchReport(
        matched=matched,
        false_positives=len(det) - matched,
        missed=len(ref) - matched,
        mean_abs_offset=float(np.mean(offsets)) if offsets else 0.0,
        pairs=tuple(pairs),
    )


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = truth, columns = prediction

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self, names=LABEL_NAMES) -> str:
        lines = ["truth\\pred," + ",".join(names)]
        for name, row in zip(names, self.counts):
            lines.append(name + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def confusion(preds, truths, n_classes: int = NUM_CLASSES) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if preds.shape != truths.shape:
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(truths)} truths")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truths, preds), 1)
    return ConfusionMatrix(cm)


@dataclass(frozen=True)
class ClassMetrics:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    accuracy: float
    degenerate: np.ndarray  # classes with a zero precision or recall denominator

    def to_csv(self, names=LABEL_NAMES) -> str:
        lines = ["metric," + ",".join(names)]
        for key in ("precision", "recall", "f1"):
            lines.append(key + "," + ",".join(f"{v:.4f}" for v in getattr(self, key)))
        lines.append(f"accuracy,{self.accuracy:.4f}")
        return "\n".join(lines) + "\n"


def metrics(cm: ConfusionMatrix) -> ClassMetrics:
    counts = np.asarray(cm.counts, dtype=np.int64)
    total = counts.sum()
    if total == 0:
        raise ValueError("confusion matrix is empty")
    diag = np.diag(counts).astype(np.float64)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(diag), where=denom > 0)
    accuracy = int(np.trace(counts)) / int(total)
    return ClassMetrics(precision, recall, f1, accuracy, (col == 0) | (row == 0))
