"""Input validation shared by the estimators."""

from __future__ import annotations

import numpy as np

from .media import FrameSequence


def as_volume(clip) -> np.ndarray:
    """Return a ``(T, H, W)`` float array from a FrameSequence or array-like."""
    if isinstance(clip, FrameSequence):
        return clip.frames
    vol = np.asarray(clip, dtype=np.float64)
    if vol.ndim == 2:
        vol = vol[None]
    if vol.ndim != 3:
        raise ValueError(f"expected a (T, H, W) clip, got shape {vol.shape}")
    if not np.all(np.isfinite(vol)):
        raise ValueError("clip contains NaN or infinite values")
    return vol


def check_clips(X) -> list:
    """Validate a collection of clips; accepts a list or a 4-D array."""
    if isinstance(X, FrameSequence):
        raise TypeError("expected a collection of clips, got a single FrameSequence; wrap it in a list")
    if isinstance(X, np.ndarray) and X.ndim == 4:
        X = list(X)
    clips = list(X)
    if not clips:
        raise ValueError("no clips given")
    for c in clips:
        as_volume(c)
    return clips


def as_sequence(clip, like=None, fps: float = 25.0) -> FrameSequence:
    if isinstance(clip, FrameSequence):
        return clip
    if like is not None:
        return like.with_frames(clip)
    return FrameSequence(as_volume(clip), fps)


def rebuild(like, frames):
    """Return ``frames`` in the same container type as ``like``."""
    if isinstance(like, FrameSequence):
        return like.with_frames(frames)
    return frames


def check_partition(partition) -> tuple[int, int, int]:
    part = tuple(int(v) for v in partition)
    if len(part) != 3 or min(part) < 1:
        raise ValueError(f"partition must be three positive block counts (nx, ny, nt), got {partition}")
    return part
