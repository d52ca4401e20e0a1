"""Facial geometry: anchor tracking, in-plane correction, block grid and LWM registration."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .media import FrameSequence

N_LANDMARKS = 68
# 0-based landmark indices of the eye contours in the 68-point scheme
LEFT_EYE = slice(36, 42)
RIGHT_EYE = slice(42, 48)

GRID_ROWS = GRID_COLS = 6
GRID_WIDTH_IOD = 2.4
GRID_HEIGHT_NOSE = 3.0
EYE_ROW = 2  # eye line sits on the boundary between rows 2 and 3

CROP_WIDTH_IOD = 1.8
CROP_HEIGHT_IOD = 2.2
CROP_EYE_HEIGHT = 0.3

REGISTRATION_TOL = 0.5


class TrackingError(RuntimeError):
    """Raised when a tracked point diverges; ``frame`` is the 0-based index."""

    def __init__(self, message, frame):
        super().__init__(message)
        self.frame = frame


class DegenerateGeometryError(ValueError):
    pass


def bilinear(image: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample ``image`` at float coordinates; reads outside the frame return 0."""
    return ndimage.map_coordinates(image, [y, x], order=1, mode="constant", cval=0.0)


def _sample_clamped(image, x, y):
    return ndimage.map_coordinates(image, [y, x], order=1, mode="nearest")


# -- KLT tracking --------------------------------------------------------------


def _pyramid(image: np.ndarray, levels: int) -> list[np.ndarray]:
    pyr = [image]
    for _ in range(1, levels):
        blurred = ndimage.gaussian_filter(pyr[-1], 1.0, mode="nearest")
        pyr.append(blurred[::2, ::2])
    return pyr


def _lk_point(
    pyr_a, pyr_b, grads_a, point, half, max_iter, eps, min_eig, frame_index
) -> np.ndarray:
    """Track one point from pyramid A to pyramid B; returns its position in B."""
    levels = len(pyr_a)
    guess = np.zeros(2)
    offs = np.arange(-half, half + 1, dtype=np.float64)
    oy, ox = np.meshgrid(offs, offs, indexing="ij")
    ox, oy = ox.ravel(), oy.ravel()
    for level in range(levels - 1, -1, -1):
        a, b = pyr_a[level], pyr_b[level]
        gx_img, gy_img = grads_a[level]
        p = point / 2**level
        xs, ys = p[0] + ox, p[1] + oy
        tmpl = _sample_clamped(a, xs, ys)
        gx = _sample_clamped(gx_img, xs, ys)
        gy = _sample_clamped(gy_img, xs, ys)
        G = np.array([[gx @ gx, gx @ gy], [gx @ gy, gy @ gy]])
        if np.linalg.eigvalsh(G)[0] / ox.size < min_eig:
            raise TrackingError(
                f"tracking diverged at frame {frame_index}: no texture under window", frame_index
            )
        d = np.zeros(2)
        for _ in range(max_iter):
            warped = _sample_clamped(b, xs + guess[0] + d[0], ys + guess[1] + d[1])
            err = tmpl - warped
            step = np.linalg.solve(G, np.array([gx @ err, gy @ err]))
            d += step
            if np.hypot(*step) < eps:
                break
        if level > 0:
            guess = 2.0 * (guess + d)
        else:
            guess = guess + d
    return point + guess


def track_points(
    seq: FrameSequence,
    initial,
    levels: int = 3,
    window: int = 15,
    max_iter: int = 30,
    eps: float = 0.01,
    min_eig: float = 1e-7,
    max_residual: float = 0.1,
) -> np.ndarray:
    """Pyramidal Lucas-Kanade tracking of each point through the sequence.

    Parameters
    ----------
    initial : array-like of shape (P, 2)
        ``(x, y)`` positions in frame 0.

    Returns
    -------
    ndarray of shape (T, P, 2)
    """
    pts = np.asarray(initial, dtype=np.float64).reshape(-1, 2)
    h, w = seq.shape
    if np.any(pts < 0) or np.any(pts[:, 0] > w - 1) or np.any(pts[:, 1] > h - 1):
        raise ValueError("initial points must lie inside frame 0")
    half = window // 2
    out = np.empty((len(seq), len(pts), 2))
    out[0] = pts

    def prepare(frame):
        pyr = _pyramid(frame, levels)
        grads = [(ndimage.sobel(p, 1, mode="nearest") / 8.0, ndimage.sobel(p, 0, mode="nearest") / 8.0) for p in pyr]
        return pyr, grads

    pyr_a, grads_a = prepare(seq.frames[0])
    offs = np.arange(-half, half + 1, dtype=np.float64)
    oy, ox = np.meshgrid(offs, offs, indexing="ij")
    for t in range(1, len(seq)):
        pyr_b, grads_b = prepare(seq.frames[t])
        for j, p in enumerate(out[t - 1]):
            q = _lk_point(pyr_a, pyr_b, grads_a, p, half, max_iter, eps, min_eig, t)
            if not (0 <= q[0] <= w - 1 and 0 <= q[1] <= h - 1) or not np.all(np.isfinite(q)):
                raise TrackingError(f"tracking diverged at frame {t}: point left the frame", t)
            resid = np.mean(
                np.abs(
                    _sample_clamped(seq.frames[t - 1], p[0] + ox.ravel(), p[1] + oy.ravel())
                    - _sample_clamped(seq.frames[t], q[0] + ox.ravel(), q[1] + oy.ravel())
                )
            )
            if resid > max_residual:
                raise TrackingError(
                    f"tracking diverged at frame {t}: residual {resid:.3f} above {max_residual}", t
                )
            out[t, j] = q
        pyr_a, grads_a = pyr_b, grads_b
    return out


# -- in-plane correction and block grid ----------------------------------------


@dataclass(frozen=True)
class Similarity:
    """z -> scale_rot * z + shift on complex coordinates x + iy."""

    scale_rot: complex = 1 + 0j
    shift: complex = 0j

    @classmethod
    def from_pairs(cls, src_a, src_b, dst_a, dst_b) -> "Similarity":
        za, zb = complex(*src_a), complex(*src_b)
        wa, wb = complex(*dst_a), complex(*dst_b)
        if abs(zb - za) < 1e-9:
            raise DegenerateGeometryError("coincident eye corners")
        a = (wb - wa) / (zb - za)
        return cls(a, wa - a * za)

    def __call__(self, points):
        pts = np.asarray(points, dtype=np.float64)
        z = pts[..., 0] + 1j * pts[..., 1]
        w = self.scale_rot * z + self.shift
        return np.stack([w.real, w.imag], axis=-1)

    def inverse(self) -> "Similarity":
        inv = 1.0 / self.scale_rot
        return Similarity(inv, -self.shift * inv)

    def matrix(self) -> np.ndarray:
        a = self.scale_rot
        return np.array([[a.real, -a.imag, self.shift.real], [a.imag, a.real, self.shift.imag]])


@dataclass(frozen=True)
class BlockGrid:
    """A fixed 6x6 grid in corrected-frame coordinates.

    ``xs`` and ``ys`` are the 7 integer cell edges along each axis; cell
    ``(r, c)`` covers ``[xs[c], xs[c+1]) x [ys[r], ys[r+1])``.
    """

    xs: tuple[int, ...]
    ys: tuple[int, ...]
    transforms: tuple[Similarity, ...] = ()

    @property
    def cells(self) -> list[tuple[int, int, int, int]]:
        """``(x, y, width, height)`` per cell, row-major."""
        return [
            (self.xs[c], self.ys[r], self.xs[c + 1] - self.xs[c], self.ys[r + 1] - self.ys[r])
            for r in range(len(self.ys) - 1)
            for c in range(len(self.xs) - 1)
        ]

    @property
    def width(self) -> int:
        return self.xs[-1] - self.xs[0]

    @property
    def height(self) -> int:
        return self.ys[-1] - self.ys[0]

    def cell_index(self, x: float, y: float) -> int | None:
        c = int(np.searchsorted(self.xs, x, side="right")) - 1
        r = int(np.searchsorted(self.ys, y, side="right")) - 1
        if 0 <= c < len(self.xs) - 1 and 0 <= r < len(self.ys) - 1:
            return r * (len(self.xs) - 1) + c
        return None


def make_grid(anchors, frame_shape=None, width_iod=GRID_WIDTH_IOD, height_nose=GRID_HEIGHT_NOSE) -> BlockGrid:
    """Build the grid from one anchor triple ``[[lx, ly], [rx, ry], [nx, ny]]``."""
    left, right, nose = np.asarray(anchors, dtype=np.float64).reshape(3, 2)
    iod = np.hypot(*(right - left))
    if iod < 1e-6:
        raise DegenerateGeometryError("coincident eye corners")
    mid = 0.5 * (left + right)
    eye_dir = (right - left) / iod
    # perpendicular distance of the nasal spine from the eye line
    nose_dist = abs(eye_dir[0] * (nose - mid)[1] - eye_dir[1] * (nose - mid)[0])
    if nose_dist < 1e-3 * iod:
        raise DegenerateGeometryError("nasal spine is collinear with the eye corners")
    width = width_iod * iod
    height = height_nose * nose_dist
    x0 = mid[0] - width / 2.0
    y0 = mid[1] - height * EYE_ROW / GRID_ROWS
    xs = tuple(int(v) for v in np.round(x0 + width * np.arange(GRID_COLS + 1) / GRID_COLS))
    ys = tuple(int(v) for v in np.round(y0 + height * np.arange(GRID_ROWS + 1) / GRID_ROWS))
    if frame_shape is not None:
        h, w = frame_shape
        if xs[0] < 0 or ys[0] < 0 or xs[-1] > w or ys[-1] > h:
            raise DegenerateGeometryError(f"face grid {xs[0]}..{xs[-1]} x {ys[0]}..{ys[-1]} exceeds the {w}x{h} frame")
    if len(set(xs)) != len(xs) or len(set(ys)) != len(ys):
        raise DegenerateGeometryError("face too small for a 6x6 grid")
    return BlockGrid(xs, ys)


def warp_similarity(frame: np.ndarray, sim: Similarity) -> np.ndarray:
    """Resample ``frame`` so that output(x) = frame(sim^-1(x))."""
    h, w = frame.shape
    if sim.scale_rot == 1 and sim.shift == 0:
        return frame.copy()
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    src = sim.inverse()(np.stack([xx, yy], axis=-1))
    return bilinear(frame, src[..., 0], src[..., 1])


def correct_and_grid(seq: FrameSequence, points) -> tuple[FrameSequence, BlockGrid]:
    """Undo per-frame rotation/scale relative to frame 0 and build the block grid.

    ``points`` has shape (T, 3, 2): left eye corner, right eye corner, nasal spine.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape != (len(seq), 3, 2):
        raise ValueError(f"expected anchor array of shape ({len(seq)}, 3, 2), got {pts.shape}")
    grid = make_grid(pts[0], seq.shape)
    ref_l, ref_r = pts[0, 0], pts[0, 1]
    sims, frames = [], []
    for frame, p in zip(seq.frames, pts):
        sim = Similarity.from_pairs(p[0], p[1], ref_l, ref_r)
        # snap numerically-identity transforms so static input is untouched
        if abs(sim.scale_rot - 1) < 1e-12 and abs(sim.shift) < 1e-9:
            sim = Similarity()
        sims.append(sim)
        frames.append(np.clip(warp_similarity(frame, sim), 0.0, 1.0))
    grid = BlockGrid(grid.xs, grid.ys, tuple(sims))
    return seq.with_frames(np.stack(frames)), grid


# -- Local Weighted Mean registration ------------------------------------------


def _monomials(dx, dy):
    return np.stack([np.ones_like(dx), dx, dy, dx * dx, dx * dy, dy * dy], axis=-1)


def lwm_weight(r: np.ndarray) -> np.ndarray:
    """Cubic radial weight 1 - 3r^2 + 2r^3 on [0, 1), zero beyond."""
    r = np.asarray(r, dtype=np.float64)
    return np.where(r < 1.0, 1.0 - 3.0 * r**2 + 2.0 * r**3, 0.0)


@dataclass(frozen=True)
class LwmTransform:
    """Piecewise quadratic map blended by local radial weights."""

    controls: np.ndarray  # (K, 2) source control points
    targets: np.ndarray  # (K, 2)
    radii: np.ndarray  # (K,)
    coef_x: np.ndarray  # (K, 6) in coordinates centred on each control, scaled by its radius
    coef_y: np.ndarray

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        flat = pts.reshape(-1, 2)
        out = np.empty_like(flat)
        chunk = 4096
        for s in range(0, len(flat), chunk):
            out[s : s + chunk] = self._eval(flat[s : s + chunk])
        return out.reshape(pts.shape)

    def _eval(self, p):
        d = p[:, None, :] - self.controls[None, :, :]  # (P, K, 2)
        dist = np.hypot(d[..., 0], d[..., 1])
        dx = d[..., 0] / self.radii
        dy = d[..., 1] / self.radii
        mono = _monomials(dx, dy)  # (P, K, 6)
        px = np.einsum("pkm,km->pk", mono, self.coef_x)
        py = np.einsum("pkm,km->pk", mono, self.coef_y)
        w = lwm_weight(dist / self.radii)
        wsum = w.sum(axis=1)
        res = np.empty((len(p), 2))
        covered = wsum > 0
        res[covered, 0] = (w[covered] * px[covered]).sum(axis=1) / wsum[covered]
        res[covered, 1] = (w[covered] * py[covered]).sum(axis=1) / wsum[covered]
        if not covered.all():
            # outside every support region: use the nearest control's polynomial
            idx = np.flatnonzero(~covered)
            near = np.argmin(dist[idx], axis=1)
            res[idx, 0] = px[idx, near]
            res[idx, 1] = py[idx, near]
        return res

    @property
    def residuals(self) -> np.ndarray:
        return np.hypot(*(self(self.controls) - self.targets).T)


def lwm_fit(source, target, n_neighbors: int = 12) -> LwmTransform:
    """Fit a Local Weighted Mean transform mapping ``source`` points onto ``target``."""
    src = np.asarray(source, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(target, dtype=np.float64).reshape(-1, 2)
    if src.shape != dst.shape:
        raise ValueError(f"source and target differ in shape: {src.shape} vs {dst.shape}")
    k = len(src)
    if k < n_neighbors:
        raise ValueError(f"need at least {n_neighbors} control points, got {k}")
    dists = np.hypot(*(src[:, None, :] - src[None, :, :]).transpose(2, 0, 1))
    radii = np.empty(k)
    coef_x = np.empty((k, 6))
    coef_y = np.empty((k, 6))
    for i in range(k):
        order = np.argsort(dists[i], kind="stable")[:n_neighbors]
        r = dists[i, order[-1]]
        if r <= 0:
            raise DegenerateGeometryError(f"control point {i} has a degenerate support set")
        radii[i] = r
        d = (src[order] - src[i]) / r
        A = _monomials(d[:, 0], d[:, 1])
        if np.linalg.matrix_rank(A, tol=1e-8) < 6:
            raise DegenerateGeometryError(f"support set of control point {i} cannot fit a quadratic")
        coef_x[i] = np.linalg.lstsq(A, dst[order, 0], rcond=None)[0]
        coef_y[i] = np.linalg.lstsq(A, dst[order, 1], rcond=None)[0]
    tf = LwmTransform(src.copy(), dst.copy(), radii, coef_x, coef_y)
    worst = tf.residuals.max()
    if worst > REGISTRATION_TOL:
        warnings.warn(f"LWM control-point residual {worst:.3f} px exceeds {REGISTRATION_TOL} px")
    return tf


def eye_centres(landmarks) -> tuple[np.ndarray, np.ndarray]:
    lm = np.asarray(landmarks, dtype=np.float64)
    return lm[LEFT_EYE].mean(axis=0), lm[RIGHT_EYE].mean(axis=0)


def crop_rect(model_landmarks) -> tuple[float, float, int, int]:
    """``(x0, y0, width, height)`` of the face crop in model coordinates."""
    left, right = eye_centres(model_landmarks)
    iod = np.hypot(*(right - left))
    width = int(round(CROP_WIDTH_IOD * iod))
    height = int(round(CROP_HEIGHT_IOD * iod))
    mid = 0.5 * (left + right)
    return mid[0] - width / 2.0, mid[1] - CROP_EYE_HEIGHT * height, width, height


def _check_landmarks(lm, name):
    lm = np.asarray(lm, dtype=np.float64)
    if lm.shape != (N_LANDMARKS, 2):
        raise ValueError(f"{name} must be {N_LANDMARKS} (x, y) points, got shape {lm.shape}")
    return lm


def register_clip(clip: FrameSequence, first_frame_landmarks, model_landmarks) -> FrameSequence:
    """Warp every frame onto the model face with one LWM fit, then crop the face."""
    lm = _check_landmarks(first_frame_landmarks, "first_frame_landmarks")
    model = _check_landmarks(model_landmarks, "model_landmarks")
    # inverse map: model-face coordinates -> clip coordinates
    tf = lwm_fit(model, lm)
    x0, y0, width, height = crop_rect(model)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    src = tf(np.stack([xx + x0, yy + y0], axis=-1))
    frames = np.stack([bilinear(f, src[..., 0], src[..., 1]) for f in clip.frames])
    return clip.with_frames(np.clip(frames, 0.0, 1.0))


# -- file formats --------------------------------------------------------------


def read_anchor_file(path) -> np.ndarray:
    """Anchor CSV: one row ``lx,ly,rx,ry,nx,ny`` for frame 1 (header optional)."""
    rows = _read_numeric_rows(path)
    if len(rows) < 1 or len(rows[0]) != 6:
        raise ValueError(f"{path}: expected a row lx,ly,rx,ry,nx,ny")
    return np.asarray(rows[0], dtype=np.float64).reshape(3, 2)


def write_anchor_file(path, anchors) -> None:
    a = np.asarray(anchors, dtype=np.float64).reshape(6)
    Path(path).write_text("lx,ly,rx,ry,nx,ny\n" + ",".join(repr(float(v)) for v in a) + "\n")


def read_landmark_file(path) -> np.ndarray:
    """Landmark CSV: 68 rows of ``x,y``."""
    rows = _read_numeric_rows(path)
    return _check_landmarks(np.asarray(rows, dtype=np.float64), str(path))


def write_landmark_file(path, landmarks) -> None:
    lm = _check_landmarks(landmarks, "landmarks")
    Path(path).write_text("".join(f"{x!r},{y!r}\n" for x, y in lm.tolist()))


def _read_numeric_rows(path):
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            if rows:
                raise ValueError(f"{path}: non-numeric row {line!r}")
            # header
    return rows


def model_landmarks() -> np.ndarray:
    """The shipped frontal model face (68 points)."""
    return read_landmark_file(Path(__file__).parent / "assets" / "model_landmarks.csv")
