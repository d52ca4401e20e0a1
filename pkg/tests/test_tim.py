import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microexpr.media import FrameSequence
from microexpr.tim import TemporalInterpolator, interpolate, path_graph_basis, tim_fit, tim_resample


def test_basis_orthogonal():
    for n in (2, 5, 12):
        B = path_graph_basis(n, np.arange(n) / (n - 1))
        G = B.T @ B
        assert np.allclose(G, np.diag(np.diag(G)), atol=1e-10)
        assert np.allclose(B.sum(axis=0), 0.0, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**31 - 1))
def test_exact_at_original_positions(n, seed):
    clip = np.random.default_rng(seed).random((n, 6, 5))
    model = tim_fit(clip)
    assert np.max(np.abs(model.evaluate(np.arange(n) / (n - 1)) - clip)) < 1e-6


def test_two_frames_interpolate_linearly():
    clip = np.stack([np.zeros((4, 4)), np.ones((4, 4))])
    out = tim_resample(tim_fit(clip), 5)
    # one cosine basis function: the path between the frames is a cosine arc
    assert out[0].max() < 1e-9 and abs(out[-1].min() - 1) < 1e-9
    assert np.all(np.diff(out[:, 0, 0]) > 0)


def test_constant_clip(rng):
    clip = np.full((6, 4, 4), 0.3)
    assert np.allclose(tim_resample(tim_fit(clip), 13), 0.3)


def test_ramp_upsampled_is_monotone():
    clip = np.stack([np.full((4, 4), j / 5) for j in range(5)])
    means = tim_resample(tim_fit(clip), 10).mean(axis=(1, 2))
    assert np.all(np.diff(means) >= 0)


def test_downsample_34_to_10(rng):
    clip = rng.random((34, 8, 8))
    out = tim_resample(tim_fit(clip), 10)
    assert out.shape == (10, 8, 8)
    assert np.max(np.abs(out[0] - clip[0])) < 1e-6
    assert np.max(np.abs(out[-1] - clip[-1])) < 1e-6


def test_linearity_and_reversal(rng):
    clip = rng.random((7, 5, 5)) * 0.4
    model = tim_fit(clip)
    t = np.linspace(0, 1, 11)
    assert np.allclose(tim_fit(2 * clip).evaluate(t), 2 * model.evaluate(t))
    assert np.allclose(tim_fit(clip[::-1]).evaluate(t), model.evaluate(t)[::-1])


def test_errors(rng):
    with pytest.raises(ValueError):
        tim_fit(rng.random((1, 4, 4)))
    with pytest.raises(ValueError):
        tim_resample(tim_fit(rng.random((3, 4, 4))), 1)
    with pytest.raises(ValueError):
        tim_fit(rng.random((3, 4, 4))).evaluate([1.5])


def test_keeps_metadata_and_transformer(rng):
    seq = FrameSequence(rng.random((9, 16, 16)), 60.0, "c")
    out = interpolate(seq, 12)
    assert len(out) == 12 and out.fps == 60.0 and out.id == "c"
    assert TemporalInterpolator(None).fit_transform([seq])[0] is seq
    assert [len(c) for c in TemporalInterpolator(10).fit_transform([seq, seq])] == [10, 10]
