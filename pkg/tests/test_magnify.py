import numpy as np
import pytest

from microexpr.magnify import (
    MotionMagnifier,
    collapse,
    laplacian_pyramid,
    level_gain,
    level_wavelength,
    magnify,
    zero_phase_bandpass,
)
from microexpr.media import FrameSequence
from oscillation import amplitude, oscillating_clip


def test_pyramid_round_trip(rng):
    frames = rng.random((3, 40, 36))
    pyr = laplacian_pyramid(frames, 3)
    assert len(pyr) == 4
    assert np.allclose(collapse(pyr), frames, atol=1e-12)


def test_gain_schedule():
    assert level_gain(1, 64) == 0.0
    assert level_wavelength(0) == 2.0 and level_wavelength(3) == 16.0
    # levels at or above gamma get the full gain, finer ones less
    assert level_gain(4, 16) == 3.0
    assert level_gain(4, 8) < 3.0
    assert level_gain(4, 2) == 0.0
    assert level_gain(4, 32, delta=1.0) == 3.0
    assert level_gain(4, 16, delta=1.0) == 1.0
    with pytest.raises(ValueError):
        level_gain(0.5, 16)


def test_alpha_one_is_identity():
    seq, _ = oscillating_clip(n=20)
    out = magnify(seq, alpha=1)
    assert np.abs(out.frames - seq.frames).mean() < 1e-3


def test_constant_clip_stays_constant():
    seq = FrameSequence(np.full((12, 32, 32), 0.4), 30)
    out = magnify(seq, alpha=10)
    assert np.allclose(out.frames, 0.4, atol=1e-9)


def test_output_range(rng):
    seq = FrameSequence(rng.random((12, 32, 32)), 30)
    out = magnify(seq, alpha=30)
    assert out.frames.min() >= 0.0 and out.frames.max() <= 1.0


def test_reversal_symmetry(rng):
    seq = FrameSequence(0.3 + 0.4 * rng.random((15, 32, 32)), 30)
    fwd = magnify(seq, alpha=3, gamma=4).frames
    rev = magnify(seq.with_frames(seq.frames[::-1]), alpha=3, gamma=4).frames[::-1]
    assert np.allclose(fwd, rev, atol=1e-12)


def test_bandpass_removes_dc():
    x = np.ones((40, 3))
    assert np.allclose(zero_phase_bandpass(x, 30, (0.4, 7.5)), 0.0, atol=1e-12)
    with pytest.raises(ValueError):
        zero_phase_bandpass(x, 30, (20, 40))


def test_displacement_grows_with_alpha():
    seq, base = oscillating_clip(n=30)
    amps = [amplitude(magnify(seq, alpha=a).frames, base) for a in (1, 2, 4)]
    assert amps[0] == pytest.approx(0.5, abs=0.02)
    assert amps[0] < amps[1] < amps[2]


def test_preconditions(rng):
    with pytest.raises(ValueError):
        magnify(FrameSequence(rng.random((3, 32, 32)), 30))
    with pytest.raises(ValueError):
        magnify(FrameSequence(rng.random((8, 20, 20)), 30), levels=5)


def test_transformer(rng):
    clips = [FrameSequence(rng.random((8, 32, 32)), 30) for _ in range(2)]
    out = MotionMagnifier(alpha=1).fit_transform(clips)
    assert len(out) == 2 and out[0].frames.shape == (8, 32, 32)
