"""Local binary patterns with circular bilinear sampling and uniform-2 mapping."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class LbpParams:
    p: int = 8
    r: int = 3
    uniform: bool = True

    def __post_init__(self):
        if self.p < 4:
            raise ValueError(f"LBP needs p >= 4 neighbours, got {self.p}")
        if self.r < 1:
            raise ValueError(f"LBP radius must be >= 1, got {self.r}")

    @property
    def n_bins(self) -> int:
        return self.p * (self.p - 1) + 3 if self.uniform else 2**self.p


def transitions(code: int, p: int) -> int:
    """Number of circular 0/1 transitions in a ``p``-bit pattern."""
    bits = [(code >> i) & 1 for i in range(p)]
    return sum(bits[i] != bits[(i + 1) % p] for i in range(p))


@lru_cache(maxsize=None)
def uniform_table(p: int) -> np.ndarray:
    """Map raw codes to uniform bins in ascending code order; the rest share the last bin."""
    n_uniform = p * (p - 1) + 2
    table = np.full(2**p, n_uniform, dtype=np.intp)
    nxt = 0
    for code in range(2**p):
        if transitions(code, p) <= 2:
            table[code] = nxt
            nxt += 1
    assert nxt == n_uniform
    table.flags.writeable = False
    return table


def neighbour_offsets(p: int, r: float) -> np.ndarray:
    """``(dx, dy)`` of each neighbour: angle 0 east, counter-clockwise on screen (y down)."""
    ang = 2.0 * np.pi * np.arange(p) / p
    off = np.stack([r * np.cos(ang), -r * np.sin(ang)], axis=1)
    snapped = np.round(off)
    near = np.abs(off - snapped) < 1e-9
    off[near] = snapped[near]
    return off


def _sample(img, yc, xc, dx, dy):
    """Bilinear read at (yc + dy, xc + dx) over the last two axes of ``img``.

    Uses the nested-lerp form so constant neighbourhoods reproduce their
    value exactly (comparisons against the centre must not flip on rounding).
    """
    x0, y0 = int(np.floor(dx)), int(np.floor(dy))
    fx, fy = dx - x0, dy - y0
    ya, xa = yc + y0, xc + x0
    v00 = img[..., ya, xa]
    if fx == 0 and fy == 0:
        return v00
    if fy == 0:
        return v00 + fx * (img[..., ya, xa + 1] - v00)
    v10 = img[..., ya + 1, xa]
    if fx == 0:
        return v00 + fy * (v10 - v00)
    top = v00 + fx * (img[..., ya, xa + 1] - v00)
    bot = v10 + fx * (img[..., ya + 1, xa + 1] - v10)
    return top + fy * (bot - top)


def _codes_at(img, yc, xc, params: LbpParams):
    centre = img[..., yc, xc]
    code = np.zeros(centre.shape, dtype=np.intp)
    for bit, (dx, dy) in enumerate(neighbour_offsets(params.p, params.r)):
        code |= (_sample(img, yc, xc, dx, dy) >= centre).astype(np.intp) << bit
    if params.uniform:
        code = uniform_table(params.p)[code]
    return code


def lbp_code(frame, x: int, y: int, params: LbpParams = LbpParams()) -> int:
    """LBP code (uniform bin index if ``params.uniform``) of one pixel."""
    img = np.asarray(frame, dtype=np.float64)
    h, w = img.shape
    r = params.r
    if not (r <= x <= w - 1 - r and r <= y <= h - 1 - r):
        raise ValueError(f"centre ({x}, {y}) has no full radius-{r} neighbourhood in a {w}x{h} frame")
    return int(_codes_at(img, np.array(y), np.array(x), params))


def lbp_map(images, params: LbpParams = LbpParams()) -> np.ndarray:
    """Codes for every centre with a full neighbourhood.

    Works over the last two axes; output is cropped by ``r`` on each side of
    those axes (``out[..., i, j]`` is the code of pixel ``(i + r, j + r)``).
    """
    img = np.asarray(images, dtype=np.float64)
    h, w = img.shape[-2:]
    r = params.r
    if h < 2 * r + 1 or w < 2 * r + 1:
        raise ValueError(f"{w}x{h} plane too small for radius {r}")
    yc, xc = np.meshgrid(np.arange(r, h - r), np.arange(r, w - r), indexing="ij")
    return _codes_at(img, yc, xc, params)


def lbp_frame_histogram(frame, region=None, params: LbpParams = LbpParams()) -> np.ndarray:
    """L1-normalised LBP histogram over the valid centres of ``region`` = (x, y, w, h)."""
    img = np.asarray(frame, dtype=np.float64)
    if region is None:
        region = (0, 0, img.shape[1], img.shape[0])
    x, y, w, h = region
    r = params.r
    xs = range(max(x, r), min(x + w, img.shape[1] - r))
    ys = range(max(y, r), min(y + h, img.shape[0] - r))
    if len(xs) == 0 or len(ys) == 0:
        raise ValueError(f"region {region} contains no centre with a full radius-{r} neighbourhood")
    yc, xc = np.meshgrid(np.asarray(ys), np.asarray(xs), indexing="ij")
    codes = _codes_at(img, yc, xc, params)
    hist = np.bincount(codes.ravel(), minlength=params.n_bins).astype(np.float64)
    return hist / hist.sum()


def block_histograms(code_map: np.ndarray, cells, r: int, n_bins: int) -> np.ndarray:
    """Per-cell L1-normalised histograms from an ``lbp_map`` output.

    ``cells`` are ``(x, y, w, h)`` rectangles in full-frame coordinates.
    Cells without valid centres give all-zero rows.
    """
    out = np.zeros((len(cells), n_bins))
    ch, cw = code_map.shape
    for i, (x, y, w, h) in enumerate(cells):
        sub = code_map[max(y - r, 0) : max(min(y + h - r, ch), 0), max(x - r, 0) : max(min(x + w - r, cw), 0)]
        if sub.size:
            hist = np.bincount(sub.ravel(), minlength=n_bins)
            out[i] = hist / sub.size
    return out
