import numpy as np
import pytest

from microexpr import synth
from microexpr.media import FrameSequence, textured_face


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def face():
    img, anchors = textured_face((128, 128), seed=3, smoothness=3.5)
    return img, anchors


@pytest.fixture
def random_clip(rng):
    def make(t=10, h=24, w=20):
        return FrameSequence(rng.random((t, h, w)), 25.0, "clip")

    return make


@pytest.fixture(scope="session")
def recognition_manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("recognition")
    return synth.recognition_corpus(out, n_subjects=4, clips_per_class=2, seed=1)
