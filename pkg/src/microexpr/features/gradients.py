"""Image gradients and orientation histograms (magnitude-weighted HOG, count-based HIGO)."""

from __future__ import annotations

import numpy as np

MAG_EPS = 1e-7


def central_difference(a: np.ndarray, axis: int) -> np.ndarray:
    """``a[i+1] - a[i-1]`` along ``axis`` with replicated borders (the [-1 0 1] filter)."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape[axis] == 1:
        return np.zeros_like(a)
    pad = [(0, 0)] * a.ndim
    pad[axis] = (1, 1)
    p = np.pad(a, pad, mode="edge")
    n = a.shape[axis]
    hi = np.take(p, np.arange(2, n + 2), axis=axis)
    lo = np.take(p, np.arange(0, n), axis=axis)
    return hi - lo


def gradient(frame) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel orientation ``atan2(I_y, I_x)`` in [-pi, pi] and magnitude."""
    img = np.asarray(frame, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < 3:
        raise ValueError(f"gradient needs a 2-D frame of at least 3x3, got {img.shape}")
    ix = central_difference(img, 1)
    iy = central_difference(img, 0)
    return np.arctan2(iy, ix), np.hypot(ix, iy)


def quantize_orientation(theta, bins: int = 8) -> np.ndarray:
    """Equal bins over [-pi, pi] with edges at -pi + 2*pi*k/B; pi falls in the last bin."""
    idx = np.floor((np.asarray(theta) + np.pi) * bins / (2.0 * np.pi)).astype(np.intp)
    return np.clip(idx, 0, bins - 1)


def orientation_histogram(theta, m, bins: int = 8, weighted: bool = True, normalize: bool = True) -> np.ndarray:
    """HOG (``weighted=True``) or HIGO (``weighted=False``) histogram of a region.

    Pixels with magnitude below ``MAG_EPS`` do not vote. A region with no
    votes yields an all-zero histogram.
    """
    theta = np.asarray(theta, dtype=np.float64).ravel()
    m = np.asarray(m, dtype=np.float64).ravel()
    keep = m >= MAG_EPS
    idx = quantize_orientation(theta[keep], bins)
    hist = np.bincount(idx, weights=m[keep] if weighted else None, minlength=bins).astype(np.float64)
    total = hist.sum()
    if normalize and total > 0:
        hist /= total
    return hist


def hog_histogram(region, bins: int = 8, weighted: bool = True) -> np.ndarray:
    """Orientation histogram of a 2-D image region."""
    theta, m = gradient(region)
    return orientation_histogram(theta, m, bins, weighted)


def higo_histogram(region, bins: int = 8) -> np.ndarray:
    return hog_histogram(region, bins, weighted=False)
