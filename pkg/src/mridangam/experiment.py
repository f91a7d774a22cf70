"""Training driver and the tonic-invariance experiment grid."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from . import nn
from .augment import dataset_from_recording, shift_recording
from .dataset_io import balance_dataset, compute_class_weights, split_train_val
from .features import FEATURE_DIM
from .onset import OnsetConfig
from .types import LabeledDataset

logger = logging.getLogger(__name__)

MAX_GRID_SHIFT = 3

# (train shifts added to the unshifted data, test shifts) and the accuracy
# (%) reported for that configuration on the original recordings.
DEFAULT_GRID = (
    ((), (-1, 1)),
    ((), (-2, 2)),
    ((-1, 1), (-2, 2)),
    ((-1, 1), (-3, 3)),
    ((-2, -1, 1, 2), (-3, 3)),
)
REFERENCE_ACCURACY = {row: acc for row, acc in zip(DEFAULT_GRID, (71, 58, 68, 52, 72))}


@dataclass(frozen=True)
class PipelineConfig:
    n_bins: int = FEATURE_DIM
    hidden: tuple = nn.FULL_HIDDEN
    dropout: float = 0.25
    train: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    train_fraction: float = 0.8
    split_seed: int = 0
    detect: bool = False
    onset: OnsetConfig = field(default_factory=OnsetConfig)
    normalize: bool = False
    weighted: bool = False
    balanced: int | None = None

    def architecture(self):
        return nn.build_architecture(self.n_bins, self.hidden, dropout=self.dropout)

    def feature_kwargs(self):
        return dict(n_bins=self.n_bins, detect=self.detect, onset_config=self.onset,
                    normalize=self.normalize)


def train_classifier(dataset: LabeledDataset, config: PipelineConfig, val_set: LabeledDataset | None = None):
    """Split (unless ``val_set`` is given), optionally balance / weight, train.

    Returns ``(network, history, train_set, val_set)``.
    """
    if val_set is None:
        train_set, val_set = split_train_val(dataset, config.train_fraction, config.split_seed)
        if len(val_set) == 0:
            val_set = train_set
    else:
        train_set = dataset
    if config.balanced is not None:
        train_set = balance_dataset(train_set, config.balanced, seed=config.split_seed)
    tconf = config.train
    if config.weighted:
        weights = compute_class_weights(train_set.class_counts)
        tconf = replace(tconf, class_weights=tuple(float(w) for w in weights))
    net, history = nn.train(train_set, val_set, config.architecture(), tconf)
    return net, history, train_set, val_set


@dataclass
class GridRow:
    train_shifts: tuple
    test_shifts: tuple
    seen_accuracy: float
    heldout_accuracy: float | None = None
    reference_accuracy: float | None = None


class _FeatureCache:
    def __init__(self, recordings, config: PipelineConfig):
        self.recordings = {r.name: r for r in recordings}
        self.config = config
        self._store = {}

    def get(self, names, shifts) -> LabeledDataset:
        parts = []
        for name in names:
            for s in sorted(set(shifts)):
                key = (name, s)
                if key not in self._store:
                    rec = shift_recording(self.recordings[name], s)
                    self._store[key] = dataset_from_recording(rec, **self.config.feature_kwargs())
                parts.append(self._store[key])
        return LabeledDataset.concat(parts)


def _accuracy(net, dataset: LabeledDataset) -> float:
    return nn.evaluate(net, dataset)[1]


def run_invariance_grid(recordings, grid=DEFAULT_GRID, config: PipelineConfig = PipelineConfig(),
                        holdout: str | None = None) -> list[GridRow]:
    """Train one classifier per grid row and score it on shifted test data.

    Training always includes the unshifted recordings plus the row's train
    shifts.  ``seen_accuracy`` tests on the same compositions at the test
    shifts; when there are at least two recordings, ``heldout_accuracy``
    repeats the row with ``holdout`` (default: the last recording) removed
    from training and used as the test composition.
    """
    grid = [(tuple(a), tuple(b)) for a, b in grid]
    if not grid:
        raise ValueError("empty grid")
    for train_shifts, test_shifts in grid:
        if any(abs(s) > MAX_GRID_SHIFT for s in train_shifts + test_shifts):
            raise ValueError(f"grid shifts must lie within +/-{MAX_GRID_SHIFT} semitones")
        if not test_shifts:
            raise ValueError("every grid row needs at least one test shift")
    recordings = list(recordings)
    names = [r.name for r in recordings]
    if len(set(names)) != len(names):
        raise ValueError("recording names must be unique")
    cache = _FeatureCache(recordings, config)
    if holdout is None and len(names) > 1:
        holdout = names[-1]
    rows = []
    for train_shifts, test_shifts in grid:
        shifts = (0, *train_shifts)
        net, *_ = train_classifier(cache.get(names, shifts), config)
        row = GridRow(train_shifts, test_shifts, _accuracy(net, cache.get(names, test_shifts)),
                      reference_accuracy=REFERENCE_ACCURACY.get((train_shifts, test_shifts)))
        if holdout is not None:
            rest = [n for n in names if n != holdout]
            net_h, *_ = train_classifier(cache.get(rest, shifts), config)
            row.heldout_accuracy = _accuracy(net_h, cache.get([holdout], test_shifts))
        logger.info("grid row train=%s test=%s seen=%.3f heldout=%s", train_shifts, test_shifts,
                    row.seen_accuracy, row.heldout_accuracy)
        rows.append(row)
    return rows


def _fmt_shifts(shifts) -> str:
    return " ".join(f"{s:+d}" for s in shifts) if shifts else "none"


def grid_to_csv(rows) -> str:
    lines = ["train_shifts,test_shifts,seen_accuracy,heldout_accuracy,reference_accuracy"]
    for r in rows:
        held = "" if r.heldout_accuracy is None else f"{100 * r.heldout_accuracy:.2f}"
        ref = "" if r.reference_accuracy is None else f"{r.reference_accuracy:g}"
        lines.append(f"{_fmt_shifts(r.train_shifts)},{_fmt_shifts(r.test_shifts)},"
                     f"{100 * r.seen_accuracy:.2f},{held},{ref}")
    return "\n".join(lines) + "\n"


def format_grid(rows) -> str:
    header = f"{'train':<14}{'test':<10}{'seen %':>8}{'held-out %':>12}{'ref %':>9}"
    out = [header, "-" * len(header)]
    for r in rows:
        held = "-" if r.heldout_accuracy is None else f"{100 * r.heldout_accuracy:.1f}"
        ref = "-" if r.reference_accuracy is None else f"{r.reference_accuracy:g}"
        out.append(f"{_fmt_shifts(r.train_shifts):<14}{_fmt_shifts(r.test_shifts):<10}"
                   f"{100 * r.seen_accuracy:>8.1f}{held:>12}{ref:>9}")
    return "\n".join(out)


def parse_shift_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text or text.lower() == "none":
        return ()
    return tuple(int(v) for v in text.replace(" ", "").split(","))


def parse_grid(text: str):
    """``train:test;train:test`` with comma-separated shifts, e.g. ``none:-1,1;-1,1:-2,2``."""
    rows = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ValueError(f"grid row {chunk!r} must look like 'train:test'")
        a, b = chunk.split(":", 1)
        rows.append((parse_shift_list(a), parse_shift_list(b)))
    if not rows:
        raise ValueError("empty grid")
    return rows

