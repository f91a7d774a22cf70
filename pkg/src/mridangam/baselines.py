"""Reference classifiers: template correlation and a linear one-vs-rest SVM."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _binfmt
from .features import TemplateSet
from .types import NUM_CLASSES, LabeledDataset, StrokeLabel

TEMPLATE_MAGIC = b"MRDT"
SVM_MAGIC = b"MRDS"


class ZeroVarianceError(ValueError):
    """Raised when a correlation operand is constant."""


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two 1-D vectors of equal length")
    if len(x) < 2:
        raise ValueError("pearson needs at least two samples")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(np.dot(xc, xc))
    sy = np.sqrt(np.dot(yc, yc))
    if sx == 0 or sy == 0:
        raise ZeroVarianceError("correlation undefined for a constant vector")
    return float(np.clip(np.dot(xc, yc) / (sx * sy), -1.0, 1.0))


def template_scores(templates: TemplateSet, feature) -> np.ndarray:
    """Correlation of ``feature`` with each template; degenerate pairs score 0."""
    scores = np.zeros(NUM_CLASSES)
    for c, template in enumerate(templates.templates):
        try:
            scores[c] = pearson(template, feature)
        except ZeroVarianceError:
            scores[c] = 0.0
    return scores


def template_classify(templates: TemplateSet, feature) -> StrokeLabel:
    return StrokeLabel(int(np.argmax(template_scores(templates, feature))))


def template_accuracy(templates: TemplateSet, dataset: LabeledDataset) -> float:
    preds = [template_classify(templates, f) for f in dataset.features]
    return float(np.mean(np.asarray(preds) == dataset.labels))


# --------------------------------------------------------------------------
# linear SVM


@dataclass
class SvmModel:
    weights: np.ndarray  # (6, dim)
    biases: np.ndarray  # (6,)

    def scores(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.weights.shape[1]:
            raise ValueError(f"feature dim {x.shape[1]} does not match model dim {self.weights.shape[1]}")
        return x @ self.weights.T + self.biases


def svm_train(train_set: LabeledDataset, epochs: int = 20, lr: float = 0.1, reg: float = 1e-3,
              batch_size: int = 32, seed: int = 0) -> SvmModel:
    """One-vs-rest L2-regularised hinge loss by mini-batch subgradient descent.

    All six scorers are updated together.  The step size decays as
    ``lr / (1 + lr * reg * t)`` so the shrink factor stays in (0, 1].
    The bias is regularised along with the weights.
    """
    counts = train_set.class_counts
    if len(train_set) == 0 or np.any(counts == 0):
        missing = [StrokeLabel(c).text for c in range(NUM_CLASSES) if counts[c] == 0]
        raise ValueError(f"SVM training needs every class; missing {', '.join(missing) or 'all'}")
    x = train_set.features.astype(np.float64)
    signs = -np.ones((len(train_set), NUM_CLASSES))
    signs[np.arange(len(train_set)), train_set.labels] = 1.0
    w = np.zeros((NUM_CLASSES, x.shape[1]))
    b = np.zeros(NUM_CLASSES)
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        order = rng.permutation(len(x))
        for start in range(0, len(x), batch_size):
            idx = order[start:start + batch_size]
            t += 1
            step = lr / (1.0 + lr * reg * t)
            y = signs[idx]
            margins = y * (x[idx] @ w.T + b)
            active = (margins < 1.0) * y  # (batch, 6)
            grad_w = -(active.T @ x[idx]) / len(idx)
            grad_b = -active.mean(axis=0)
            w *= 1.0 - step * reg
            b *= 1.0 - step * reg
            w -= step * grad_w
            b -= step * grad_b
    return SvmModel(w, b)


def svm_predict(model: SvmModel, feature) -> StrokeLabel:
    return StrokeLabel(int(np.argmax(model.scores(feature)[0])))


def svm_predict_batch(model: SvmModel, features) -> np.ndarray:
    return np.argmax(model.scores(features), axis=1)


# --------------------------------------------------------------------------
# serialization


def save_templates(path, templates: TemplateSet) -> None:
    with open(path, "wb") as fh:
        _binfmt.write_header(fh, TEMPLATE_MAGIC)
        _binfmt.write_arrays(fh, [templates.templates, templates.counts])


def load_templates(path) -> TemplateSet:
    buf = Path(path).read_bytes()
    offset = _binfmt.read_header(buf, TEMPLATE_MAGIC, path)
    (templates, counts), _ = _binfmt.read_arrays(buf, offset, 2, path)
    return TemplateSet(templates.astype(np.float64), counts.astype(np.int64))


def save_svm(path, model: SvmModel) -> None:
    with open(path, "wb") as fh:
        _binfmt.write_header(fh, SVM_MAGIC)
        _binfmt.write_arrays(fh, [model.weights, model.biases])


def load_svm(path) -> SvmModel:
    buf = Path(path).read_bytes()
    offset = _binfmt.read_header(buf, SVM_MAGIC, path)
    (w, b), _ = _binfmt.read_arrays(buf, offset, 2, path)
    return SvmModel(w.astype(np.float64), b.astype(np.float64))
