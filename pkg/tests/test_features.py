import numpy as np
import pytest

from mridangam.features import (
    DFT_SIZE,
    FEATURE_DIM,
    compute_templates,
    decimate_spectrum,
    extract_all,
    extract_stroke_spectrum,
    stroke_window,
)
from mridangam.types import AudioClip, StrokeLabel

from .oracles import SR, brute_dft, sine


@pytest.fixture(scope="module")
def noise_clip():
    return AudioClip(np.random.default_rng(0).uniform(-0.5, 0.5, 3 * SR))


class TestWindow:
    @pytest.mark.parametrize(
        "onset, nxt, expected",
        [
            (1.00, 1.50, (46560, 70560)),  # 0.97 s .. 1.47 s = 24,000 samples
            (0.50, 0.60, (22560, 27360)),
            (0.01, 0.20, (0, 8160)),  # start clamps to 0
            (0.50, 2.00, (22560, 22560 + DFT_SIZE)),  # > 1.03 s gap: truncated
            (2.50, None, (118560, 144000)),  # last stroke: clip end wins over +1 s
        ],
    )
    def test_window_arithmetic(self, noise_clip, onset, nxt, expected):
        assert stroke_window(noise_clip, onset, nxt) == expected

    def test_empty_window(self, noise_clip):
        with pytest.raises(ValueError, match="empty window"):
            extract_stroke_spectrum(noise_clip, 1.0, 1.0)

    def test_zero_padding(self, noise_clip):
        start, stop = stroke_window(noise_clip, 1.0, 1.5)
        padded = np.zeros(DFT_SIZE)
        padded[: stop - start] = noise_clip.samples[start:stop]
        expected = np.abs(np.fft.fft(padded))[:FEATURE_DIM]
        np.testing.assert_allclose(extract_stroke_spectrum(noise_clip, 1.0, 1.5), expected, rtol=1e-9)


class TestSpectrum:
    def test_sine_peak_and_brute_force(self):
        clip = AudioClip(np.concatenate([np.zeros(SR // 2), sine(1000.0, 1.0)]))
        vec = extract_stroke_spectrum(clip, 0.53, 1.2)
        assert vec.shape == (FEATURE_DIM,)
        assert np.argmax(vec) == 1000
        start, stop = stroke_window(clip, 0.53, 1.2)
        bins = np.arange(950, 1051)
        np.testing.assert_allclose(vec[bins], brute_dft(clip.samples[start:stop], bins, DFT_SIZE),
                                   rtol=1e-8, atol=1e-8)

    def test_zero(self, silence):
        assert not extract_stroke_spectrum(silence, 0.2, 0.5).any()

    def test_shift_invariance(self, noise_clip):
        shift = 1234
        moved = AudioClip(np.concatenate([np.zeros(shift), noise_clip.samples]))
        a = extract_stroke_spectrum(noise_clip, 1.0, 1.4)
        b = extract_stroke_spectrum(moved, 1.0 + shift / SR, 1.4 + shift / SR)
        np.testing.assert_allclose(b, a, rtol=1e-6, atol=1e-9 * a.max())

    def test_scaling(self, noise_clip):
        scaled = AudioClip(0.25 * noise_clip.samples)
        np.testing.assert_allclose(extract_stroke_spectrum(scaled, 1.0, 1.4),
                                   0.25 * extract_stroke_spectrum(noise_clip, 1.0, 1.4), rtol=1e-9)

    def test_parseval_full_spectrum(self, noise_clip):
        full = extract_stroke_spectrum(noise_clip, 1.0, 1.4, full=True)
        start, stop = stroke_window(noise_clip, 1.0, 1.4)
        energy = np.sum(noise_clip.samples[start:stop] ** 2)
        assert full.shape == (DFT_SIZE,)
        assert np.isclose(np.sum(full**2), DFT_SIZE * energy, rtol=1e-10)

    def test_normalize(self, noise_clip):
        assert extract_stroke_spectrum(noise_clip, 1.0, 1.4, normalize=True).max() == pytest.approx(1.0)


class TestExtractAll:
    def test_cardinality_and_definition(self, noise_clip):
        vecs = extract_all(noise_clip, [0.5, 1.0, 1.5])
        assert len(vecs) == 3
        np.testing.assert_array_equal(vecs[1], extract_stroke_spectrum(noise_clip, 1.0, 1.5))

    @pytest.mark.parametrize("length", [int(1.2 * SR), int(2.0 * SR), int(2.9 * SR)])
    def test_last_window_within_clip(self, length):
        clip = AudioClip(np.ones(length))
        start, stop = stroke_window(clip, 1.1, None)
        assert stop <= length
        assert stop == min(start + SR, length)

    def test_unsorted(self, noise_clip):
        with pytest.raises(ValueError):
            extract_all(noise_clip, [1.0, 0.5])


class TestTemplates:
    def test_one_per_class(self, rng):
        feats = rng.random((6, 10))
        t = compute_templates(feats, list(StrokeLabel))
        np.testing.assert_array_equal(t.templates, feats)
        np.testing.assert_array_equal(t.counts, np.ones(6))

    def test_mean(self, rng):
        v = rng.random(10)
        feats = np.vstack([v, 3 * v, rng.random((5, 10))])
        t = compute_templates(feats, [0, 0, 1, 2, 3, 4, 5])
        np.testing.assert_allclose(t.templates[0], 2 * v)

    def test_missing_class(self, rng):
        with pytest.raises(ValueError, match="composite"):
            compute_templates(rng.random((5, 4)), [0, 1, 2, 3, 4])


def test_decimate(rng):
    x = rng.random((3, 12000))
    d = decimate_spectrum(x, 1200)
    assert d.shape == (3, 1200)
    assert np.isclose(d[1, 7], x[1, 70:80].mean())
    with pytest.raises(ValueError):
        decimate_spectrum(x, 7)
