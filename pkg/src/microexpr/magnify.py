"""Eulerian motion magnification on a Laplacian pyramid."""

from __future__ import annotations

import numpy as np
from scipy import ndimage, signal
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import as_volume, check_clips, rebuild

_BINOMIAL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _blur(img):
    out = ndimage.correlate1d(img, _BINOMIAL, axis=-1, mode="reflect")
    return ndimage.correlate1d(out, _BINOMIAL, axis=-2, mode="reflect")


def _reduce(img):
    return _blur(img)[..., ::2, ::2]


def _expand(img, shape):
    up = np.zeros(img.shape[:-2] + tuple(shape))
    up[..., ::2, ::2] = img
    return 4.0 * _blur(up)


def laplacian_pyramid(frames: np.ndarray, levels: int) -> list[np.ndarray]:
    """``levels`` band-pass layers followed by the low-pass residual.

    Works on the last two axes, so a whole ``(T, H, W)`` stack is
    decomposed at once.
    """
    pyr = []
    g = np.asarray(frames, dtype=np.float64)
    for _ in range(levels):
        nxt = _reduce(g)
        pyr.append(g - _expand(nxt, g.shape[-2:]))
        g = nxt
    pyr.append(g)
    return pyr


def collapse(pyr: list[np.ndarray]) -> np.ndarray:
    g = pyr[-1]
    for lap in reversed(pyr[:-1]):
        g = lap + _expand(g, lap.shape[-2:])
    return g


def level_wavelength(level: int) -> float:
    """Representative spatial wavelength (px) of pyramid level ``level``."""
    return float(2 ** (level + 1))


def level_gain(alpha: float, wavelength: float, gamma: float = 16.0, delta: float | None = None) -> float:
    """Additive gain for one level under the ``(1 + g) * delta < wavelength / 8`` guard.

    ``alpha`` is the motion multiplier (1 means no magnification), so the
    additive gain is ``g = alpha - 1``. When ``delta`` is not given it is
    the largest motion that ``alpha`` may magnify at the cutoff wavelength
    ``gamma``: ``delta = gamma / (8 * alpha)``. Levels at or above
    ``gamma`` then receive the full gain and finer ones are attenuated.
    """
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    g = alpha - 1.0
    if g == 0:
        return 0.0
    if delta is None:
        delta = gamma / (8.0 * alpha)
    return float(max(min(g, wavelength / (8.0 * delta) - 1.0), 0.0))


def zero_phase_bandpass(x: np.ndarray, fps: float, band, order: int = 1) -> np.ndarray:
    """Butterworth band-pass along axis 0, run forward-backward with reflected edges.

    The result is averaged with the time-reversed run so it commutes exactly
    with reversing the input.
    """
    lo, hi = band
    nyq = fps / 2.0
    if not 0 < lo < hi:
        raise ValueError(f"invalid passband {band}")
    hi = min(hi, 0.99 * nyq)
    if lo >= hi:
        raise ValueError(f"passband {band} lies above the Nyquist rate for {fps} fps")
    sos = signal.butter(order, [lo / nyq, hi / nyq], btype="bandpass", output="sos")
    n = x.shape[0]
    padlen = min(n // 2, n - 1)
    fwd = signal.sosfiltfilt(sos, x, axis=0, padtype="even", padlen=padlen)
    rev = signal.sosfiltfilt(sos, x[::-1], axis=0, padtype="even", padlen=padlen)[::-1]
    return 0.5 * (fwd + rev)


def magnify(clip, alpha: float = 4.0, gamma: float = 16.0, band=None, levels: int = 4, delta=None, fps: float | None = None):
    """Magnify subtle motion in ``clip``; returns frames of the same shape clipped to [0, 1]."""
    vol = as_volume(clip)
    fps = getattr(clip, "fps", fps)
    if fps is None:
        raise ValueError("fps is required for an array clip")
    t, h, w = vol.shape
    if t < 4:
        raise ValueError(f"clip of {t} frames is too short to magnify (needs 4)")
    if min(h, w) < 2**levels:
        raise ValueError(f"{w}x{h} frames too small for a {levels}-level pyramid")
    if band is None:
        band = (0.4, fps / 4.0)
    gains = [level_gain(alpha, level_wavelength(lv), gamma, delta) for lv in range(levels + 1)]
    if not any(gains):
        return rebuild(clip, np.clip(collapse(laplacian_pyramid(vol, levels)), 0.0, 1.0))
    pyr = laplacian_pyramid(vol, levels)
    out = []
    for layer, g in zip(pyr, gains):
        if g > 0:
            layer = layer + g * zero_phase_bandpass(layer, fps, band)
        out.append(layer)
    return rebuild(clip, np.clip(collapse(out), 0.0, 1.0))


class MotionMagnifier(TransformerMixin, BaseEstimator):
    """Eulerian magnification applied clip by clip.

    Parameters
    ----------
    alpha : float
        Motion multiplier; 1 leaves the clip unchanged.
    gamma : float
        Cutoff wavelength in pixels below which the gain is attenuated.
    band : tuple of float or None
        Temporal passband in Hz; defaults to ``(0.4, fps / 4)``.
    levels : int
        Number of band-pass pyramid levels.
    """

    def __init__(self, alpha=4.0, gamma=16.0, band=None, levels=4, delta=None):
        self.alpha = alpha
        self.gamma = gamma
        self.band = band
        self.levels = levels
        self.delta = delta

    def fit(self, X, y=None):
        check_clips(X)
        level_gain(self.alpha, 2.0, self.gamma, self.delta)
        return self

    def transform(self, X):
        return [
            magnify(c, self.alpha, self.gamma, self.band, self.levels, self.delta)
            for c in check_clips(X)
        ]
