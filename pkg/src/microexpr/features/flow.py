"""Dense optical flow (coarse-to-fine Horn-Schunck) and histograms of flow orientation."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

FLOW_EPS = 1e-4

_AVG_KERNEL = np.array([[1, 2, 1], [2, 0, 2], [1, 2, 1]], dtype=np.float64) / 12.0


def _downsample(img):
    return ndimage.gaussian_filter(img, 1.0, mode="nearest")[::2, ::2]


def _warp(img, u, v):
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return ndimage.map_coordinates(img, [yy + v, xx + u], order=1, mode="nearest")


def horn_schunck(reference, frame, lam: float = 0.05, iterations: int = 100, levels: int = 2):
    """Flow ``(u, v)`` such that ``frame(x + u, y + v) ~ reference(x, y)``.

    ``lam`` weights the smoothness term against the brightness-constancy
    term for intensities in [0, 1]. Each pyramid level warps ``frame``
    with the upsampled coarser flow and refines it with ``iterations``
    Jacobi sweeps.
    """
    ref = np.asarray(reference, dtype=np.float64)
    img = np.asarray(frame, dtype=np.float64)
    if ref.shape != img.shape:
        raise ValueError(f"frames differ in size: {ref.shape} vs {img.shape}")
    pyr_ref, pyr_img = [ref], [img]
    for _ in range(1, levels):
        if min(pyr_ref[-1].shape) < 16:
            break
        pyr_ref.append(_downsample(pyr_ref[-1]))
        pyr_img.append(_downsample(pyr_img[-1]))

    u = np.zeros(pyr_ref[-1].shape)
    v = np.zeros(pyr_ref[-1].shape)
    for level in range(len(pyr_ref) - 1, -1, -1):
        r, f = pyr_ref[level], pyr_img[level]
        if u.shape != r.shape:
            zy, zx = r.shape[0] / u.shape[0], r.shape[1] / u.shape[1]
            u = 2.0 * ndimage.zoom(u, (zy, zx), order=1, mode="nearest")[: r.shape[0], : r.shape[1]]
            v = 2.0 * ndimage.zoom(v, (zy, zx), order=1, mode="nearest")[: r.shape[0], : r.shape[1]]
        warped = _warp(f, u, v)
        ix = 0.5 * (np.gradient(warped, axis=1) + np.gradient(r, axis=1))
        iy = 0.5 * (np.gradient(warped, axis=0) + np.gradient(r, axis=0))
        it = warped - r
        u0, v0 = u.copy(), v.copy()
        denom = lam + ix**2 + iy**2
        for _ in range(iterations):
            ub = ndimage.convolve(u, _AVG_KERNEL, mode="nearest")
            vb = ndimage.convolve(v, _AVG_KERNEL, mode="nearest")
            resid = ix * (ub - u0) + iy * (vb - v0) + it
            u = ub - ix * resid / denom
            v = vb - iy * resid / denom
    return u, v


def flow_direction_bins(angle, bins: int = 8) -> np.ndarray:
    """Bins centred on ``2*pi*k/B - pi`` so the cardinal directions sit mid-bin.

    Angle 0 (motion to the right) lands in bin ``B // 2``; straight down
    (+y) in bin ``3B/4``.
    """
    width = 2.0 * np.pi / bins
    shifted = np.mod(np.asarray(angle) + np.pi + width / 2.0, 2.0 * np.pi)
    return np.minimum((shifted / width).astype(np.intp), bins - 1)


def flow_orientation_histogram(u, v, bins: int = 8) -> np.ndarray:
    """Magnitude-weighted, L1-normalised histogram of flow directions."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    mag = np.hypot(u, v)
    keep = mag >= FLOW_EPS
    idx = flow_direction_bins(np.arctan2(v[keep], u[keep]), bins)
    hist = np.bincount(idx, weights=mag[keep], minlength=bins)
    total = hist.sum()
    return hist / total if total > 0 else hist


def hoof(frame, reference, region=None, bins: int = 8, flow=None) -> np.ndarray:
    """HOOF of ``region`` = (x, y, w, h) for the flow from ``reference`` to ``frame``.

    ``flow`` may carry a precomputed ``(u, v)`` pair for the whole frame.
    """
    if flow is None:
        flow = horn_schunck(reference, frame)
    u, v = flow
    if region is not None:
        x, y, w, h = region
        u, v = u[y : y + h, x : x + w], v[y : y + h, x : x + w]
    return flow_orientation_histogram(u, v, bins)
