"""Temporal interpolation via the path-graph embedding of a clip.

The Laplacian of an ``n``-node path graph has eigenvectors
``cos(pi * k * (j + 1/2) / n)``. Writing the node index through
``t = j / (n - 1)`` turns each eigenvector into a continuous function of
``t`` in [0, 1]; a clip is mapped linearly from that curve to pixel space,
and new frames are produced by evaluating the curve at other ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import as_volume, check_clips, rebuild

DEFAULT_LENGTH = 10


def path_graph_basis(n: int, t) -> np.ndarray:
    """The ``n - 1`` non-constant path-graph eigenfunctions at positions ``t``; shape (len(t), n-1)."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    k = np.arange(1, n)
    s = (n - 1) * t[:, None] + 0.5
    return np.cos(np.pi * k[None, :] * s / n)


@dataclass(frozen=True)
class TimModel:
    n: int
    mean: np.ndarray  # (H*W,)
    mapping: np.ndarray  # (n-1, H*W)
    frame_shape: tuple[int, int]

    def evaluate(self, t) -> np.ndarray:
        """Frames at curve positions ``t`` (unclamped), shape (len(t), H, W)."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("curve positions must lie in [0, 1]")
        flat = self.mean[None, :] + path_graph_basis(self.n, t) @ self.mapping
        return flat.reshape((len(t),) + self.frame_shape)


def tim_fit(clip) -> TimModel:
    """Least-squares map from the path-graph embedding to the centred frames."""
    vol = as_volume(clip)
    n = vol.shape[0]
    if n < 2:
        raise ValueError(f"temporal interpolation needs at least 2 frames, got {n}")
    X = vol.reshape(n, -1)
    mean = X.mean(axis=0)
    Y = path_graph_basis(n, np.arange(n) / (n - 1))
    mapping = np.linalg.lstsq(Y, X - mean, rcond=None)[0]
    return TimModel(n, mean, mapping, vol.shape[1:])


def tim_resample(model: TimModel, target_len: int = DEFAULT_LENGTH) -> np.ndarray:
    if target_len < 2:
        raise ValueError(f"target length must be >= 2, got {target_len}")
    t = np.arange(target_len) / (target_len - 1)
    return np.clip(model.evaluate(t), 0.0, 1.0)


def interpolate(clip, target_len: int = DEFAULT_LENGTH):
    """Resample ``clip`` to ``target_len`` frames; keeps FrameSequence metadata."""
    return rebuild(clip, tim_resample(tim_fit(clip), target_len))


class TemporalInterpolator(TransformerMixin, BaseEstimator):
    """Resample every clip to ``length`` frames; ``length=None`` passes clips through."""

    def __init__(self, length=DEFAULT_LENGTH):
        self.length = length

    def fit(self, X, y=None):
        check_clips(X)
        if self.length is not None and self.length < 2:
            raise ValueError(f"length must be >= 2 or None, got {self.length}")
        return self

    def transform(self, X):
        clips = check_clips(X)
        if self.length is None:
            return clips
        return [interpolate(c, self.length) for c in clips]
