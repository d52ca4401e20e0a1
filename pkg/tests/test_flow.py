import numpy as np
from scipy import ndimage

from microexpr.features.flow import flow_direction_bins, horn_schunck, hoof


def _texture(seed=0, size=64):
    rng = np.random.default_rng(seed)
    img = ndimage.gaussian_filter(rng.normal(size=(size, size)), 3.0, mode="wrap")
    return 0.5 + 0.3 * img / np.abs(img).max()


def test_identical_frames_give_empty_histogram():
    img = _texture()
    assert not hoof(img, img).any()


def test_translation_direction():
    ref = _texture()
    moved = ndimage.shift(ref, (0, 3), order=3, mode="wrap")
    hist = hoof(moved, ref, (8, 8, 48, 48))
    assert int(np.argmax(hist)) == flow_direction_bins(np.array([0.0]))[0]
    assert hist.max() >= 0.8


def test_perpendicular_translations_differ_by_quarter():
    ref = _texture(1)
    hx = hoof(ndimage.shift(ref, (0, 3), order=3, mode="wrap"), ref, (8, 8, 48, 48))
    hy = hoof(ndimage.shift(ref, (3, 0), order=3, mode="wrap"), ref, (8, 8, 48, 48))
    assert (int(np.argmax(hy)) - int(np.argmax(hx))) % 8 == 2


def test_flow_sign():
    ref = _texture(2)
    u, v = horn_schunck(ref, ndimage.shift(ref, (0, 1), order=3, mode="wrap"))
    assert np.median(u[16:-16, 16:-16]) > 0.5
    assert abs(np.median(v[16:-16, 16:-16])) < 0.2
