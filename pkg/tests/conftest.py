import numpy as np
import pytest

from mridangam.synth import SynthCorpusSpec, generate_corpus
from mridangam.types import AudioClip, Recording

from .oracles import SR


@pytest.fixture(scope="session")
def small_corpus():
    clip, annotations = generate_corpus(SynthCorpusSpec(strokes_per_class=10, seed=3))
    return Recording("small", clip, tuple(annotations))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def silence():
    return AudioClip(np.zeros(SR), SR)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
