import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microexpr.features.descriptors import (
    HigoTop,
    HogTop,
    LbpTop,
    PlaneCombination,
    gradient_top,
    higo_top,
    hog_top,
    lbp_top,
    read_descriptors,
    select_planes,
    write_descriptors,
)
from microexpr.features.gradients import orientation_histogram
from microexpr.features.lbp import LbpParams, lbp_frame_histogram


def test_layout_lengths(rng):
    clip = rng.random((10, 40, 40))
    assert len(lbp_top(clip, (8, 8, 2), "TOP")) == 22656
    assert len(hog_top(clip, (4, 4, 2), "XOT")) == 256
    assert len(higo_top(clip, (4, 4, 2), "XYOT")) == 512


def test_cuboid_histograms_l1(rng):
    clip = rng.random((10, 32, 32))
    v = lbp_top(clip, (2, 2, 2), "TOP")
    sums = v.values.reshape(-1, 59).sum(axis=1)
    assert np.allclose(sums, 1.0, atol=1e-9)
    raw = gradient_top(clip, (2, 2, 2), "TOP", global_norm=None)
    assert np.allclose(raw.values.reshape(-1, 8).sum(axis=1), 1.0, atol=1e-9)
    assert (raw.values >= 0).all()


def test_global_l2_and_l1(rng):
    clip = rng.random((10, 32, 32))
    assert np.linalg.norm(hog_top(clip).values) == pytest.approx(1.0, abs=1e-9)
    assert higo_top(clip, global_norm="l1").values.sum() == pytest.approx(1.0, abs=1e-9)


def test_xy_on_repeated_frame(rng):
    frame = rng.random((24, 24))
    clip = np.repeat(frame[None], 8, axis=0)
    v = lbp_top(clip, (1, 1, 1), "XY")
    assert np.allclose(v.values, lbp_frame_histogram(frame))


def test_static_clip_temporal_planes(rng):
    clip = np.repeat(rng.random((24, 24))[None], 10, axis=0)
    v = lbp_top(clip, (2, 2, 2), "XYOT").values.reshape(2, 4, 2, 59)
    assert np.array_equal(v[0], v[1])
    g = higo_top(clip, (2, 2, 2), "XYOT", global_norm=None).values.reshape(2, 4, 2, 8)
    assert np.array_equal(g[0], g[1])
    # no temporal gradient: XT angles are 0 or pi, YT likewise
    assert set(np.flatnonzero(g.sum(axis=(0, 1, 2)))) <= {0, 4, 7}


def test_short_clip_rejected(rng):
    with pytest.raises(ValueError):
        lbp_top(rng.random((5, 20, 20)), (2, 2, 1), "TOP", LbpParams(8, 3))
    # XY only needs no temporal support
    lbp_top(rng.random((5, 20, 20)), (2, 2, 1), "XY", LbpParams(8, 3))


@pytest.mark.parametrize("combo", ["XOT", "YOT", "XYOT", "XY"])
def test_slices_of_top(rng, combo):
    clip = rng.random((9, 20, 22))
    top = lbp_top(clip, (2, 2, 2), "TOP")
    assert np.array_equal(select_planes(top.values, top.layout, combo), lbp_top(clip, (2, 2, 2), combo).values)
    htop = hog_top(clip, (2, 2, 2), "TOP", global_norm=None)
    assert np.array_equal(select_planes(htop.values, htop.layout, combo), hog_top(clip, (2, 2, 2), combo, global_norm=None).values)


def test_select_missing_plane(rng):
    v = lbp_top(rng.random((9, 20, 20)), (1, 1, 1), "XOT")
    with pytest.raises(ValueError):
        select_planes(v.values, v.layout, "YOT")


def test_higo_ignores_magnitude_field(rng):
    theta = rng.uniform(-np.pi, np.pi, 500)
    m = rng.random(500)
    m[:20] = 0
    base = orientation_histogram(theta, m, 8, weighted=False)
    for _ in range(10):
        f = np.where(m > 0, 1e-3 + rng.random(500) * 10, 0.0)
        assert np.array_equal(orientation_histogram(theta, f, 8, weighted=False), base)


def test_deterministic(rng):
    clip = rng.random((10, 20, 20))
    assert np.array_equal(higo_top(clip).values, higo_top(clip).values)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 2), st.sampled_from([c.value for c in PlaneCombination]))
def test_length_rule(nx, ny, nt, combo):
    clip = np.random.default_rng(nx * 100 + ny * 10 + nt).random((8, 18, 18))
    v = hog_top(clip, (nx, ny, nt), combo)
    assert len(v) == nx * ny * nt * len(PlaneCombination(combo).planes) * 8 == v.layout.length


def test_estimators(rng):
    clips = [rng.random((10, 20, 20)) for _ in range(3)]
    for est, n in ((LbpTop((2, 2, 1), "XY", 8, 1), 4 * 59), (HogTop((2, 2, 1), "XOT"), 32), (HigoTop((2, 2, 2), "TOP"), 192)):
        X = est.fit_transform(clips)
        assert X.shape == (3, n)
        assert est.get_params()["partition"][0] == 2
    with pytest.raises(ValueError):
        HigoTop((0, 2, 2)).fit(clips)


def test_descriptor_dump_round_trip(tmp_path, rng):
    clip = rng.random((10, 20, 20))
    v = higo_top(clip, (2, 2, 1), "XYOT")
    X = np.vstack([v.values, v.values * 0.5])
    write_descriptors(tmp_path / "d.csv", ["a", "b"], ["x", "y"], X, v.layout)
    ids, labels, back, layout = read_descriptors(tmp_path / "d.csv")
    assert ids == ["a", "b"] and labels == ["x", "y"]
    assert np.array_equal(back, X)
    assert layout == v.layout
