"""Synthetic stroke corpus with a controllable tonic.

Strokes are sums of exponentially decaying sinusoids placed at fixed
ratios of the tonic, plus a decaying noise burst for the attack.  Per-stroke
jitter of partial amplitudes and tuning keeps the classes overlapping
enough that classifier comparisons are not trivial.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .types import SAMPLE_RATE, Annotation, AudioClip, StrokeLabel

PEAK_LEVEL = 0.9


@dataclass(frozen=True)
class StrokeRecipe:
    label: StrokeLabel
    partials: tuple  # of (ratio to tonic, relative amplitude, decay per second)
    noise_level: float = 0.05
    duration: float = 0.35
    noise_decay: float = 60.0
    amp_jitter: float = 0.0  # each partial amplitude scaled by U(1 - j, 1 + j)
    detune: float = 0.0  # relative std of per-stroke frequency error
    alt_partials: tuple = ()  # optional second playing variant, chosen with p=0.5

    def __post_init__(self):
        object.__setattr__(self, "label", StrokeLabel(self.label))
        for name in ("partials", "alt_partials"):
            partials = tuple(tuple(float(v) for v in p) for p in getattr(self, name))
            object.__setattr__(self, name, partials)
            if any(len(p) != 3 for p in partials):
                raise ValueError("partials are (ratio, amplitude, decay) triples")
            if any(r <= 0 for r, _, _ in partials):
                raise ValueError("partial ratios must be positive")
            if sum(a for _, a, _ in partials) > 1 + 1e-9:
                raise ValueError("partial amplitudes must sum to at most 1")
        if not self.partials:
            raise ValueError("a recipe needs at least one partial")
        if self.noise_level < 0 or self.duration <= 0:
            raise ValueError("noise_level must be >= 0 and duration > 0")
        if not 0 <= self.amp_jitter < 1:
            raise ValueError("amp_jitter must be in [0, 1)")


@dataclass(frozen=True)
class SynthCorpusSpec:
    tonic_hz: float = 160.0
    strokes_per_class: int = 100
    inter_onset: tuple = (0.12, 0.3)
    seed: int = 0
    gain_range: tuple = (0.6, 1.0)
    lead_in: float = 0.1

    def __post_init__(self):
        if not 80 <= self.tonic_hz <= 400:
            raise ValueError(f"tonic_hz must lie in [80, 400], got {self.tonic_hz}")
        lo, hi = self.inter_onset
        if lo < 0.08 or hi < lo:
            raise ValueError(f"inter_onset range must satisfy 0.08 <= min <= max, got {self.inter_onset}")
        if self.strokes_per_class < 0:
            raise ValueError("strokes_per_class must be non-negative")


def default_recipes() -> list[StrokeRecipe]:
    """Six recipes in class-index order.

    ``lo`` sits around the tonic's lower octave, ``hi`` is a harmonic stack
    above the tonic, the three ``mid`` classes are inharmonic sets that
    share some partials, and ``composite`` superposes ``lo`` and ``hi``.
    ``hi``, ``mid1`` and ``mid3`` each have a second playing variant that
    overlaps a neighbouring class in all but one partial, so a class is not
    summarised well by its mean spectrum.
    """
    lo = ((0.5, 0.55, 7.0), (1.0, 0.35, 11.0))
    hi = ((2.0, 0.45, 14.0), (3.0, 0.3, 18.0), (4.0, 0.2, 24.0))
    common = dict(amp_jitter=0.6, detune=0.01)
    return [
        StrokeRecipe(StrokeLabel.LO, lo, noise_level=0.08, duration=0.45, **common),
        StrokeRecipe(StrokeLabel.HI, hi, noise_level=0.1,
                     alt_partials=((1.0, 0.3, 14.0), (2.0, 0.35, 16.0), (3.0, 0.3, 20.0)), **common),
        StrokeRecipe(StrokeLabel.MID1, ((1.5, 0.45, 16.0), (2.7, 0.35, 20.0), (4.3, 0.2, 26.0)),
                     noise_level=0.15,
                     alt_partials=((2.2, 0.35, 25.0), (3.4, 0.3, 28.0), (7.3, 0.3, 30.0)), **common),
        StrokeRecipe(StrokeLabel.MID2, ((1.5, 0.35, 22.0), (3.4, 0.4, 18.0), (5.6, 0.2, 30.0)),
                     noise_level=0.15, **common),
        StrokeRecipe(StrokeLabel.MID3, ((2.2, 0.4, 25.0), (3.4, 0.35, 30.0), (6.1, 0.2, 35.0)),
                     noise_level=0.2, duration=0.25,
                     alt_partials=((1.5, 0.35, 22.0), (3.4, 0.35, 20.0), (4.7, 0.3, 30.0)), **common),
        StrokeRecipe(StrokeLabel.COMPOSITE, tuple((r, a * 0.5, d) for r, a, d in lo + hi),
                     noise_level=0.1, duration=0.45, **common),
    ]


def generate_stroke(recipe: StrokeRecipe, tonic_hz: float, seed=0, sample_rate: int = SAMPLE_RATE) -> AudioClip:
    rng = np.random.default_rng(seed)
    t = np.arange(int(round(recipe.duration * sample_rate))) / sample_rate
    tonal = np.zeros_like(t)
    partials = recipe.partials
    if recipe.alt_partials and rng.random() < 0.5:
        partials = recipe.alt_partials
    for ratio, amp, decay in partials:
        gain = amp * rng.uniform(1 - recipe.amp_jitter, 1 + recipe.amp_jitter)
        freq = ratio * tonic_hz * (1 + recipe.detune * rng.standard_normal())
        tonal += gain * np.exp(-decay * t) * np.sin(2 * np.pi * freq * t)
    noise = rng.standard_normal(len(t)) * np.exp(-recipe.noise_decay * t)
    signal = tonal + recipe.noise_level * np.abs(tonal).max() * noise
    peak = np.abs(signal).max()
    if peak > 0:
        signal = signal * (PEAK_LEVEL / peak)
    return AudioClip(signal, sample_rate)


def generate_corpus(spec: SynthCorpusSpec, recipes=None, sample_rate: int = SAMPLE_RATE):
    """Concatenate a shuffled stroke sequence into one clip.

    Returns ``(clip, annotations)``; every class occurs exactly
    ``spec.strokes_per_class`` times.
    """
    recipes = list(recipes) if recipes is not None else default_recipes()
    if len(recipes) != 6 or sorted(int(r.label) for r in recipes) != list(range(6)):
        raise ValueError("need exactly one recipe per stroke class")
    by_label = {int(r.label): r for r in recipes}
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(np.repeat(np.arange(6), spec.strokes_per_class))
    gaps = rng.uniform(*spec.inter_onset, size=len(order))
    onsets = spec.lead_in + np.concatenate([[0.0], np.cumsum(gaps[:-1])]) if len(order) else np.zeros(0)
    stroke_seeds = rng.integers(2**32, size=len(order))
    gains = rng.uniform(*spec.gain_range, size=len(order))
    starts = np.round(onsets * sample_rate).astype(np.int64)
    strokes = [generate_stroke(by_label[int(c)], spec.tonic_hz, int(s), sample_rate).samples
               for c, s in zip(order, stroke_seeds)]
    end = max((st + len(x) for st, x in zip(starts, strokes)), default=0)
    out = np.zeros(end + int(0.1 * sample_rate))
    for st, x, g in zip(starts, strokes, gains):
        out[st:st + len(x)] += g * x
    peak = np.abs(out).max() if len(out) else 0.0
    if peak > 0.99:
        out *= 0.99 / peak
    annotations = [Annotation(st / sample_rate, StrokeLabel(int(c))) for st, c in zip(starts, order)]
    return AudioClip(out, sample_rate), annotations


def recipes_to_json(recipes, spec: SynthCorpusSpec | None = None) -> str:
    payload = {"recipes": [dict(asdict(r), label=r.label.text) for r in recipes]}
    if spec is not None:
        payload["corpus"] = asdict(spec)
    return json.dumps(payload, indent=2)


def recipes_from_json(text: str) -> list[StrokeRecipe]:
    payload = json.loads(text)
    return [
        StrokeRecipe(**dict(r, label=StrokeLabel.parse(r["label"]))) for r in payload["recipes"]
    ]
