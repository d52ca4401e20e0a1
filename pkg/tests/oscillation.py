"""Oscillating-texture clip and a sub-pixel displacement probe for magnification checks."""

import numpy as np
from scipy import ndimage, optimize

from microexpr.media import FrameSequence

SIZE = 96
MARGIN = 16


def oscillating_clip(amplitude=0.5, freq=2.0, fps=30.0, n=60, seed=0):
    rng = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(rng.normal(size=(2 * SIZE, 2 * SIZE)), 12, mode="wrap")
    base = 0.5 + 0.35 * base / np.abs(base).max()
    shifts = amplitude * np.sin(2 * np.pi * freq * np.arange(n) / fps)
    frames = np.stack([_crop(ndimage.shift(base, (0, s), order=3, mode="wrap")) for s in shifts])
    return FrameSequence(frames, fps, "osc"), base


def _crop(img):
    o = SIZE // 2
    return img[o : o + SIZE, o : o + SIZE]


def displacements(frames, base):
    inner = (slice(MARGIN, SIZE - MARGIN),) * 2
    out = []
    for f in frames:
        def cost(s):
            ref = _crop(ndimage.shift(base, (0, s), order=3, mode="wrap"))
            return np.sum((f[inner] - ref[inner]) ** 2)

        out.append(optimize.minimize_scalar(cost, bounds=(-4, 4), method="bounded", options={"xatol": 1e-4}).x)
    return np.array(out)


def amplitude(frames, base, freq=2.0, fps=30.0):
    """Least-squares sine amplitude of the measured horizontal displacement."""
    d = displacements(frames, base)
    s = np.sin(2 * np.pi * freq * np.arange(len(d)) / fps)
    return float(d @ s / (s @ s))
