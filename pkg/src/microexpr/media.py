"""Frame sequences: loading, saving and synthetic transient generation.

This is the only module that touches pixel files. Frames are float64 arrays
of luminance in ``[0, 1]``; a sequence is a ``(T, H, W)`` stack.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

FRAME_PATTERN = "frame_{:06d}.pgm"
_FRAME_RE = re.compile(r"^frame_\d{6}\.(pgm|png|ppm)$")
MIN_FRAME_SIDE = 16

# ITU-R BT.601 luma weights
BT601 = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class FrameSequence:
    """Ordered grayscale frames with a frame rate.

    Parameters
    ----------
    frames : ndarray of shape (T, H, W)
        Luminance values in [0, 1].
    fps : float
        Frames per second.
    id : str
        Opaque identifier (subject + clip).
    """

    frames: np.ndarray
    fps: float
    id: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim == 2:
            frames = frames[None]
        if frames.ndim != 3:
            raise ValueError(f"frames must be (T, H, W), got shape {frames.shape}")
        if frames.shape[0] < 1:
            raise ValueError("a sequence needs at least one frame")
        if min(frames.shape[1:]) < MIN_FRAME_SIDE:
            raise ValueError(
                f"frames must be at least {MIN_FRAME_SIDE} px per side, got {frames.shape[1:]}"
            )
        if not np.all(np.isfinite(frames)) or frames.min() < 0.0 or frames.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        frames.flags.writeable = False
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "fps", float(self.fps))

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1], self.frames.shape[2]

    def with_frames(self, frames, id: str | None = None) -> "FrameSequence":
        """Return a new sequence sharing fps (and id unless given)."""
        return FrameSequence(frames, self.fps, self.id if id is None else id)

    def excerpt(self, start: int, stop: int, id: str | None = None) -> "FrameSequence":
        """Frames ``start..stop-1`` (0-based, half-open)."""
        return self.with_frames(self.frames[start:stop], id=id)

    def __eq__(self, other):
        if not isinstance(other, FrameSequence):
            return NotImplemented
        return (
            self.id == other.id
            and self.fps == other.fps
            and self.frames.shape == other.frames.shape
            and np.array_equal(self.frames, other.frames)
        )

    __hash__ = None


def _decode(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode == "L":
                arr = np.asarray(im, dtype=np.float64)
            elif im.mode in ("I", "I;16"):
                raise ValueError("only 8-bit images are supported")
            else:
                rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
                arr = rgb @ np.asarray(BT601)
    except (OSError, SyntaxError) as exc:
        raise ValueError(f"cannot decode frame {path}: {exc}") from exc
    return np.clip(arr / 255.0, 0.0, 1.0)


def load_sequence(directory, fps: float, id: str = "") -> FrameSequence:
    """Load every ``frame_NNNNNN.*`` file in ``directory`` in filename order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"missing frame directory: {directory}")
    files = sorted(p for p in directory.iterdir() if _FRAME_RE.match(p.name))
    if not files:
        raise ValueError(f"no frames matching frame_%06d.pgm in {directory}")
    frames = [_decode(p) for p in files]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise ValueError(f"inconsistent dimensions across frames in {directory}: {sorted(shapes)}")
    return FrameSequence(np.stack(frames), fps, id)


def write_pgm(path, frame: np.ndarray) -> None:
    """Write one frame as binary P5 with maxval 255."""
    data = np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def save_sequence(seq: FrameSequence, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for stale in directory.glob("frame_*.pgm"):
        stale.unlink()
    for i, frame in enumerate(seq.frames, start=1):
        write_pgm(directory / FRAME_PATTERN.format(i), frame)
    return directory


def quantize(frames: np.ndarray) -> np.ndarray:
    """Round to the 8-bit grid so a PGM round trip is lossless."""
    return np.round(np.clip(frames, 0.0, 1.0) * 255.0) / 255.0


# -- synthesis ---------------------------------------------------------------


@dataclass(frozen=True)
class TransientSpec:
    """Shape of a synthetic micro-motion.

    ``amplitude`` is the apex displacement in pixels along ``direction``
    (radians, image coordinates with y pointing down). ``intensity`` adds a
    brightness ramp of that size at the apex. ``drift`` is a whole-frame
    translation in px/frame along ``drift_direction``. ``noise`` is the
    std of additive Gaussian pixel noise drawn from ``seed``.
    """

    amplitude: float = 2.0
    direction: float = 0.0
    intensity: float = 0.0
    drift: float = 0.0
    drift_direction: float = 0.0
    noise: float = 0.0
    seed: int = 0


def transient_profile(n: int, onset: int, offset: int) -> np.ndarray:
    """Triangular 0 -> 1 -> 0 weight over ``[onset, offset]``, apex at the midpoint."""
    t = np.arange(n, dtype=np.float64)
    apex = 0.5 * (onset + offset)
    half = max(apex - onset, 0.5)
    prof = 1.0 - np.abs(t - apex) / half
    prof[(t < onset) | (t > offset)] = 0.0
    return np.clip(prof, 0.0, 1.0)


def _shift(image: np.ndarray, dx: float, dy: float) -> np.ndarray:
    # cubic spline: bilinear rendering adds a blur that pulses with the fractional shift
    if dx == 0.0 and dy == 0.0:
        return image.copy()
    return ndimage.shift(image, (dy, dx), order=3, mode="nearest")


def synthesize_transient(
    base: np.ndarray,
    onset: int,
    offset: int,
    length: int,
    block: tuple[int, int, int, int],
    motion: TransientSpec = TransientSpec(),
    fps: float = 25.0,
    id: str = "synthetic",
) -> FrameSequence:
    """Build a sequence that is ``base`` except for a brief motion inside ``block``.

    ``block`` is ``(x, y, width, height)``. Frame indices are 0-based.
    """
    base = np.asarray(base, dtype=np.float64)
    h, w = base.shape
    bx, by, bw, bh = block
    if bx < 0 or by < 0 or bw < 1 or bh < 1 or bx + bw > w or by + bh > h:
        raise ValueError(f"block {block} out of bounds for {w}x{h} frame")
    if not 0 <= onset <= offset < length:
        raise ValueError(f"need 0 <= onset <= offset < len, got {onset}, {offset}, {length}")

    rng = np.random.default_rng(motion.seed)
    prof = transient_profile(length, onset, offset)
    ux, uy = np.cos(motion.direction), np.sin(motion.direction)
    dux, duy = np.cos(motion.drift_direction), np.sin(motion.drift_direction)
    sl = (slice(by, by + bh), slice(bx, bx + bw))

    frames = np.empty((length, h, w))
    for t in range(length):
        frame = base.copy()
        a = prof[t]
        if a > 0 and (motion.amplitude != 0 or motion.intensity != 0):
            moved = _shift(base, a * motion.amplitude * ux, a * motion.amplitude * uy)
            frame[sl] = moved[sl] + a * motion.intensity
        if motion.drift:
            frame = _shift(frame, t * motion.drift * dux, t * motion.drift * duy)
        if motion.noise:
            frame = frame + rng.normal(0.0, motion.noise, frame.shape)
        frames[t] = np.clip(frame, 0.0, 1.0)
    return FrameSequence(frames, fps, id)


def textured_face(
    size: tuple[int, int] = (128, 128),
    seed: int = 0,
    smoothness: float = 2.0,
    contrast: float = 0.25,
):
    """Synthetic face-like image plus its anchor triple.

    Returns ``(image, anchors)`` where anchors is a (3, 2) array of
    ``(x, y)`` for left inner eye corner, right inner eye corner and
    nasal spine.
    """
    h, w = size
    rng = np.random.default_rng(seed)
    tex = ndimage.gaussian_filter(rng.normal(size=(h, w)), smoothness)
    tex = tex / (np.abs(tex).max() + 1e-12)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cx, cy = w / 2.0, h / 2.0
    iod = 0.25 * w
    eye_y = cy - 0.12 * h
    lx, rx = cx - iod / 2, cx + iod / 2
    ny = eye_y + 0.22 * h
    img = 0.5 + contrast * tex
    # face oval, eyes and mouth as soft dark blobs
    oval = ((xx - cx) / (0.42 * w)) ** 2 + ((yy - cy) / (0.48 * h)) ** 2
    img += 0.08 * (oval < 1.0)
    for ex in (lx - 0.08 * w, rx + 0.08 * w):
        img -= 0.2 * np.exp(-(((xx - ex) / (0.06 * w)) ** 2 + ((yy - eye_y) / (0.03 * h)) ** 2))
    img -= 0.15 * np.exp(-(((xx - cx) / (0.12 * w)) ** 2 + ((yy - (ny + 0.12 * h)) / (0.025 * h)) ** 2))
    img = ndimage.gaussian_filter(img, 0.7)
    anchors = np.array([[lx, eye_y], [rx, eye_y], [cx, ny]])
    return np.clip(img, 0.02, 0.98), anchors
