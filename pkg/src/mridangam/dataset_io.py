"""Audio / annotation loading and dataset assembly.

WAV files are read with the standard ``wave`` module (PCM 16/24-bit, mono
or stereo), mixed down to mono and resampled to 48 kHz.  Annotation files
are the two-column ``seconds,label`` CSV that Sonic Visualiser exports for
time-instant layers (comma or tab separated).
"""

from __future__ import annotations

import logging
import struct
import wave
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .types import (
    NUM_CLASSES,
    SAMPLE_RATE,
    Annotation,
    AudioClip,
    LabeledDataset,
    Recording,
    StrokeLabel,
)

logger = logging.getLogger(__name__)

COMPOSITE_THRESHOLD = 0.03
_HEADER_WORDS = {"seconds", "time", "onset"}


class WavFormatError(ValueError):
    pass


# --------------------------------------------------------------------------
# audio


def _decode_pcm(raw: bytes, sampwidth: int, channels: int) -> np.ndarray:
    if sampwidth == 2:
        ints = np.frombuffer(raw, dtype="<i2").astype(np.int32)
    else:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
    full_scale = float(1 << (8 * sampwidth - 1))
    frames = ints.reshape(-1, channels) / full_scale
    return frames.mean(axis=1)


def resample(samples: np.ndarray, source_rate: int, target_rate: int) -> np.ndarray:
    """Windowed-sinc (Kaiser FIR, polyphase) rate conversion."""
    if source_rate == target_rate:
        return np.asarray(samples, dtype=np.float64)
    ratio = Fraction(target_rate, source_rate)
    return resample_poly(samples, ratio.numerator, ratio.denominator)


def load_wav(path) -> AudioClip:
    """Read a PCM WAV file into a 48 kHz mono clip."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        # wave reports the offending wFormatTag, e.g. "unknown format: 3"
        raise WavFormatError(f"{path}: unsupported encoding ({exc})") from exc
    except (OSError, EOFError, struct.error) as exc:
        raise OSError(f"{path}: unreadable WAV file ({exc})") from exc
    if sampwidth not in (2, 3):
        raise WavFormatError(f"{path}: unsupported bit depth {8 * sampwidth} (sampwidth={sampwidth})")
    if channels not in (1, 2):
        raise WavFormatError(f"{path}: unsupported channel count {channels}")
    samples = _decode_pcm(raw, sampwidth, channels)
    if rate != SAMPLE_RATE:
        logger.info("resampling %s from %d Hz to %d Hz", path.name, rate, SAMPLE_RATE)
        samples = resample(samples, rate, SAMPLE_RATE)
    return AudioClip(samples, SAMPLE_RATE)


def write_wav(path, clip: AudioClip, bits: int = 16) -> None:
    """Write ``clip`` as mono PCM at its own sample rate."""
    if bits not in (16, 24):
        raise ValueError(f"bits must be 16 or 24, got {bits}")
    full_scale = 1 << (bits - 1)
    ints = np.round(np.asarray(clip.samples) * full_scale)
    ints = np.clip(ints, -full_scale, full_scale - 1).astype(np.int32)
    if bits == 16:
        raw = ints.astype("<i2").tobytes()
    else:
        u = ints.astype("<u4").view(np.uint8).reshape(-1, 4)
        raw = u[:, :3].tobytes()
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(bits // 8)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(raw)


# --------------------------------------------------------------------------
# annotations


def parse_annotations(text: str) -> list[Annotation]:
    """Parse ``seconds<sep>label`` lines, returning annotations sorted by onset."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        sep = "\t" if "\t" in line else ","
        fields = [f.strip() for f in line.split(sep)]
        if len(fields) != 2:
            raise ValueError(f"line {lineno}: expected 'seconds{sep}label', got {line!r}")
        time_text, label_text = fields
        if not out and time_text.lower() in _HEADER_WORDS:
            continue
        try:
            onset = float(time_text)
        except ValueError:
            raise ValueError(f"line {lineno}: unparseable time {time_text!r}") from None
        if not np.isfinite(onset) or onset < 0:
            raise ValueError(f"line {lineno}: invalid time {time_text!r}")
        try:
            label = StrokeLabel.parse(label_text)
        except ValueError:
            raise ValueError(f"line {lineno}: unknown label {label_text!r}") from None
        out.append(Annotation(onset, label))
    out.sort(key=lambda a: a.onset)
    return out


def format_annotations(annotations, header: bool = True) -> str:
    lines = ["seconds,label"] if header else []
    lines += [f"{a.onset:.6f},{a.label.text}" for a in annotations]
    return "\n".join(lines) + "\n"


def load_annotations(path) -> list[Annotation]:
    path = Path(path)
    try:
        return parse_annotations(path.read_text())
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def merge_composites(annotations, threshold: float = COMPOSITE_THRESHOLD) -> list[Annotation]:
    """Collapse near-simultaneous strokes into single ``composite`` events.

    Every maximal run of consecutive annotations whose successive gaps are
    below ``threshold`` becomes one composite annotation at the run's
    earliest onset.  A run of length one passes through untouched.
    """
    annotations = list(annotations)
    onsets = [a.onset for a in annotations]
    if any(b < a for a, b in zip(onsets, onsets[1:])):
        raise ValueError("annotations must be sorted by onset")
    out = []
    i = 0
    while i < len(annotations):
        j = i
        while j + 1 < len(annotations) and onsets[j + 1] - onsets[j] < threshold:
            j += 1
        if j == i:
            out.append(annotations[i])
        else:
            out.append(Annotation(onsets[i], StrokeLabel.COMPOSITE))
        i = j + 1
    return out


# --------------------------------------------------------------------------
# manifests


def read_manifest(path) -> list[tuple[Path, Path]]:
    """Read ``<wav_path>,<annotation_path>`` lines; relative paths resolve
    against the manifest's directory."""
    path = Path(path)
    base = path.parent
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ValueError(f"{path}: line {lineno}: expected '<wav>,<annotations>'")
        entries.append((base / parts[0], base / parts[1]))
    if not entries:
        raise ValueError(f"{path}: manifest lists no recordings")
    return entries


def load_recording(wav_path, annotation_path, merge: bool = True) -> Recording:
    clip = load_wav(wav_path)
    annotations = load_annotations(annotation_path)
    if merge:
        annotations = merge_composites(annotations)
    return Recording(Path(wav_path).stem, clip, tuple(annotations))


def load_manifest(path, merge: bool = True) -> list[Recording]:
    return [load_recording(w, a, merge=merge) for w, a in read_manifest(path)]


# --------------------------------------------------------------------------
# dataset manipulation


def split_train_val(dataset: LabeledDataset, train_fraction: float = 0.8, seed: int = 0):
    """Uniform random stroke-level split into (train, val)."""
    if not 0 < train_fraction <= 1:
        raise ValueError(f"train_fraction must be in (0, 1], got {train_fraction}")
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * train_fraction))
    return dataset.subset(np.sort(perm[:n_train])), dataset.subset(np.sort(perm[n_train:]))


def split_holdout(dataset: LabeledDataset, group: str):
    """Split off every row whose group tag equals ``group``."""
    mask = dataset.groups == group
    if not mask.any():
        raise ValueError(f"no rows belong to composition {group!r}")
    return dataset.subset(np.flatnonzero(~mask)), dataset.subset(np.flatnonzero(mask))


def compute_class_weights(class_counts) -> np.ndarray:
    """Inverse-frequency weights ``N / (K * n_c)``."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if np.any(counts <= 0):
        missing = [i for i, c in enumerate(counts) if c <= 0]
        names = [StrokeLabel(i).text if len(counts) == NUM_CLASSES else str(i) for i in missing]
        raise ValueError(f"class weights undefined: no training examples for {', '.join(names)}")
    return counts.sum() / (len(counts) * counts)


def balance_dataset(dataset: LabeledDataset, per_class: int = 400, seed: int = 0) -> LabeledDataset:
    """Sample exactly ``per_class`` rows of every label without replacement."""
    counts = dataset.class_counts
    for c, n in enumerate(counts):
        if per_class > n:
            raise ValueError(
                f"class {StrokeLabel(c).text} has only {n} examples, need {per_class}"
            )
    rng = np.random.default_rng(seed)
    picks = []
    for c in range(NUM_CLASSES):
        members = np.flatnonzero(dataset.labels == c)
        picks.append(rng.choice(members, size=per_class, replace=False))
    return dataset.subset(np.sort(np.concatenate(picks)))


# --------------------------------------------------------------------------
# feature cache: <u4 count, <u4 dim, count*dim <f4 row-major, count u1 labels


def write_feature_cache(path, dataset: LabeledDataset) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", len(dataset), dataset.dim))
        fh.write(np.ascontiguousarray(dataset.features, dtype="<f4").tobytes())
        fh.write(dataset.labels.astype(np.uint8).tobytes())


def read_feature_cache(path) -> LabeledDataset:
    data = Path(path).read_bytes()
    count, dim = struct.unpack_from("<II", data)
    expected = 8 + 4 * count * dim + count
    if len(data) != expected:
        raise ValueError(f"{path}: feature cache is {len(data)} bytes, expected {expected}")
    feats = np.frombuffer(data, dtype="<f4", count=count * dim, offset=8).reshape(count, dim)
    labels = np.frombuffer(data, dtype=np.uint8, count=count, offset=8 + 4 * count * dim)
    return LabeledDataset(feats.astype(np.float32), labels.astype(np.int64))
