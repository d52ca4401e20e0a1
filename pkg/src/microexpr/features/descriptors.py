"""Spatio-temporal descriptors on three orthogonal planes (LBP-TOP, HOG-TOP, HIGO-TOP).

Vectors are laid out cuboid-major (t, then y, then x block index), and
within each cuboid the selected planes appear in XY, XT, YT order. Every
cuboid-plane histogram is L1-normalised on its own.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..validation import as_volume, check_clips, check_partition
from .gradients import central_difference, orientation_histogram
from .lbp import LbpParams, lbp_map


class PlaneCombination(str, Enum):
    TOP = "TOP"
    XYOT = "XYOT"
    XOT = "XOT"
    YOT = "YOT"
    XY = "XY"

    @property
    def planes(self) -> tuple[str, ...]:
        return {
            "TOP": ("XY", "XT", "YT"),
            "XYOT": ("XT", "YT"),
            "XOT": ("XT",),
            "YOT": ("YT",),
            "XY": ("XY",),
        }[self.value]


ALL_PLANES = ("XY", "XT", "YT")


@dataclass(frozen=True)
class DescriptorLayout:
    kind: str
    partition: tuple[int, int, int]
    combo: str
    bins_per_plane: int
    params: dict = field(default_factory=dict)

    @property
    def planes(self):
        return PlaneCombination(self.combo).planes

    @property
    def n_cuboids(self) -> int:
        nx, ny, nt = self.partition
        return nx * ny * nt

    @property
    def length(self) -> int:
        return self.n_cuboids * len(self.planes) * self.bins_per_plane

    def to_json(self) -> str:
        d = asdict(self)
        d["partition"] = list(self.partition)
        return json.dumps(d, sort_keys=True)


@dataclass(frozen=True)
class DescriptorVector:
    values: np.ndarray
    layout: DescriptorLayout

    def __len__(self):
        return len(self.values)


def cuboid_bounds(shape, partition):
    """Yield ``(t0, t1, y0, y1, x0, x1)`` in layout order."""
    t, h, w = shape
    nx, ny, nt = partition
    te = np.round(np.linspace(0, t, nt + 1)).astype(int)
    ye = np.round(np.linspace(0, h, ny + 1)).astype(int)
    xe = np.round(np.linspace(0, w, nx + 1)).astype(int)
    for k in range(nt):
        for j in range(ny):
            for i in range(nx):
                yield te[k], te[k + 1], ye[j], ye[j + 1], xe[i], xe[i + 1]


def select_planes(vector, layout: DescriptorLayout, combo) -> np.ndarray:
    """Slice a descriptor down to a sub-combination of its planes."""
    combo = PlaneCombination(combo)
    have = layout.planes
    missing = set(combo.planes) - set(have)
    if missing:
        raise ValueError(f"{layout.combo} vector has no {sorted(missing)} planes")
    b = layout.bins_per_plane
    v = np.asarray(vector).reshape(layout.n_cuboids, len(have), b)
    idx = [have.index(p) for p in combo.planes]
    return v[:, idx, :].reshape(-1)


# -- LBP-TOP -------------------------------------------------------------------


def _lbp_plane_maps(vol, planes, params: LbpParams):
    r = params.r
    maps = {}
    if "XY" in planes:
        maps["XY"] = lbp_map(vol, params)  # (T, H-2r, W-2r)
    if "XT" in planes:
        maps["XT"] = lbp_map(vol.transpose(1, 0, 2), params)  # (H, T-2r, W-2r)
    if "YT" in planes:
        maps["YT"] = lbp_map(vol.transpose(2, 0, 1), params)  # (W, T-2r, H-2r)
    return maps


def _window(lo, hi, r, n):
    """Code-map index range for full-volume coordinates [lo, hi) on an axis of length n."""
    return max(lo - r, 0), max(min(hi - r, n - 2 * r), 0)


def lbp_top(clip, partition=(8, 8, 2), combo="TOP", params: LbpParams = LbpParams()) -> DescriptorVector:
    """Concatenated LBP histograms over cuboids and the planes in ``combo``."""
    vol = as_volume(clip)
    combo = PlaneCombination(combo)
    partition = check_partition(partition)
    t, h, w = vol.shape
    r = params.r
    if min(h, w) < 2 * r + 1:
        raise ValueError(f"{w}x{h} frames too small for LBP radius {r}")
    if set(combo.planes) & {"XT", "YT"} and t < 2 * r + 1:
        raise ValueError(f"clip of {t} frames too short for temporal LBP radius {r} (needs {2 * r + 1})")
    maps = _lbp_plane_maps(vol, combo.planes, params)
    nb = params.n_bins
    out = []
    for t0, t1, y0, y1, x0, x1 in cuboid_bounds(vol.shape, partition):
        for plane in combo.planes:
            m = maps[plane]
            if plane == "XY":
                a, b = _window(y0, y1, r, h)
                c, d = _window(x0, x1, r, w)
                sub = m[t0:t1, a:b, c:d]
            elif plane == "XT":
                a, b = _window(t0, t1, r, t)
                c, d = _window(x0, x1, r, w)
                sub = m[y0:y1, a:b, c:d]
            else:
                a, b = _window(t0, t1, r, t)
                c, d = _window(y0, y1, r, h)
                sub = m[x0:x1, a:b, c:d]
            hist = np.bincount(sub.ravel(), minlength=nb).astype(np.float64)
            if sub.size:
                hist /= sub.size
            out.append(hist)
    layout = DescriptorLayout(
        "LBP", partition, combo.value, nb, {"p": params.p, "r": params.r, "uniform": params.uniform}
    )
    return DescriptorVector(np.concatenate(out), layout)


# -- HOG-TOP / HIGO-TOP ----------------------------------------------------------


def plane_gradients(vol):
    """Orientation and magnitude per plane: XY uses (I_x, I_y), XT (I_x, I_t), YT (I_y, I_t)."""
    gx = central_difference(vol, 2)
    gy = central_difference(vol, 1)
    gt = central_difference(vol, 0)
    return {
        "XY": (np.arctan2(gy, gx), np.hypot(gx, gy)),
        "XT": (np.arctan2(gt, gx), np.hypot(gx, gt)),
        "YT": (np.arctan2(gt, gy), np.hypot(gy, gt)),
    }


def _global_normalize(v, norm):
    if norm is None:
        return v
    if norm == "l2":
        s = np.linalg.norm(v)
    elif norm == "l1":
        s = np.abs(v).sum()
    else:
        raise ValueError(f"global_norm must be 'l1', 'l2' or None, got {norm!r}")
    return v / s if s > 0 else v


def gradient_top(clip, partition=(4, 4, 2), combo="TOP", bins=8, weighted=True, global_norm="l2") -> DescriptorVector:
    vol = as_volume(clip)
    combo = PlaneCombination(combo)
    partition = check_partition(partition)
    if min(vol.shape[1:]) < 3:
        raise ValueError("frames must be at least 3x3 for gradients")
    grads = plane_gradients(vol)
    out = []
    for t0, t1, y0, y1, x0, x1 in cuboid_bounds(vol.shape, partition):
        for plane in combo.planes:
            theta, m = grads[plane]
            sl = (slice(t0, t1), slice(y0, y1), slice(x0, x1))
            out.append(orientation_histogram(theta[sl], m[sl], bins, weighted))
    values = _global_normalize(np.concatenate(out), global_norm)
    layout = DescriptorLayout(
        "HOG" if weighted else "HIGO",
        partition,
        combo.value,
        bins,
        {"orientation": "signed", "global_norm": global_norm},
    )
    return DescriptorVector(values, layout)


def hog_top(clip, partition=(4, 4, 2), combo="TOP", bins=8, global_norm="l2") -> DescriptorVector:
    return gradient_top(clip, partition, combo, bins, True, global_norm)


def higo_top(clip, partition=(4, 4, 2), combo="TOP", bins=8, global_norm="l2") -> DescriptorVector:
    return gradient_top(clip, partition, combo, bins, False, global_norm)


# -- estimators ------------------------------------------------------------------


class _TopDescriptor(TransformerMixin, BaseEstimator):
    def fit(self, X, y=None):
        check_clips(X)
        check_partition(self.partition)
        PlaneCombination(self.combo)
        self.layout_ = self._describe(as_volume(X[0])).layout
        self.n_features_out_ = self.layout_.length
        return self

    def transform(self, X):
        check_is_fitted(self, "layout_")
        return np.vstack([self._describe(as_volume(c)).values for c in check_clips(X)])


class LbpTop(_TopDescriptor):
    """LBP histograms on the planes of ``combo`` over an ``(nx, ny, nt)`` cuboid grid."""

    def __init__(self, partition=(8, 8, 2), combo="TOP", p=8, r=3, uniform=True):
        self.partition = partition
        self.combo = combo
        self.p = p
        self.r = r
        self.uniform = uniform

    def _describe(self, vol):
        return lbp_top(vol, self.partition, self.combo, LbpParams(self.p, self.r, self.uniform))


class HogTop(_TopDescriptor):
    def __init__(self, partition=(4, 4, 2), combo="TOP", bins=8, global_norm="l2"):
        self.partition = partition
        self.combo = combo
        self.bins = bins
        self.global_norm = global_norm

    def _describe(self, vol):
        return hog_top(vol, self.partition, self.combo, self.bins, self.global_norm)


class HigoTop(HogTop):
    """Like :class:`HogTop` but every non-flat pixel casts one unweighted vote."""

    def _describe(self, vol):
        return higo_top(vol, self.partition, self.combo, self.bins, self.global_norm)


DESCRIPTORS = {"LBP": LbpTop, "HOG": HogTop, "HIGO": HigoTop}


# -- descriptor dump -------------------------------------------------------------


def write_descriptors(path, ids, labels, X, layout: DescriptorLayout) -> None:
    """CSV rows ``id,label,v_1..v_d`` plus a ``<path>.json`` layout sidecar."""
    path = Path(path)
    X = np.asarray(X, dtype=np.float64)
    with open(path, "w") as fh:
        for cid, lab, row in zip(ids, labels, X):
            fh.write(",".join([str(cid), str(lab)] + [repr(float(v)) for v in row]) + "\n")
    Path(str(path) + ".json").write_text(layout.to_json() + "\n")


def read_descriptors(path):
    path = Path(path)
    layout = json.loads(Path(str(path) + ".json").read_text())
    ids, labels, rows = [], [], []
    for line in path.read_text().splitlines():
        if not line:
            continue
        cid, lab, *vals = line.split(",")
        ids.append(cid)
        labels.append(lab)
        rows.append([float(v) for v in vals])
    layout["partition"] = tuple(layout["partition"])
    return ids, labels, np.asarray(rows), DescriptorLayout(**layout)
