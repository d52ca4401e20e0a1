"""Feature-difference spotting of rapid facial movements.

Frame indices are 0-based throughout. For a window of ``N`` frames and
``k = (N - 1) / 2``, the initial difference ``F`` is defined on
``[k, n - 1 - k]`` and the contrasted difference ``C`` on
``[2k, n - 1 - 2k]``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .features.flow import hoof, horn_schunck
from .features.lbp import LbpParams, block_histograms, lbp_map
from .geometry import BlockGrid, correct_and_grid, track_points
from .media import FrameSequence

log = logging.getLogger(__name__)

FEATURES = ("LBP", "HOOF")
TAU_GRID = tuple(round(0.05 * i, 2) for i in range(21))


def window_length(window_seconds: float, fps: float) -> int:
    """Frames in the micro-interval, bumped to the next odd count."""
    n = int(np.floor(window_seconds * fps + 0.5))
    n = max(n, 1)
    return n + 1 if n % 2 == 0 else n


def chi_squared(h, g) -> np.ndarray:
    """Symmetric chi-squared distance over the last axis; 0/0 terms contribute 0."""
    h = np.asarray(h, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    num = (h - g) ** 2
    den = h + g
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return terms.sum(axis=-1)


# -- block features ----------------------------------------------------------------


def block_features(seq: FrameSequence, grid: BlockGrid, feature: str = "LBP", lbp: LbpParams = LbpParams(), bins: int = 8) -> np.ndarray:
    """Per-frame, per-block normalised histograms, shape ``(T, 36, B)``.

    HOOF uses the first frame as the fixed flow reference.
    """
    cells = grid.cells
    if feature == "LBP":
        return np.stack([block_histograms(lbp_map(f, lbp), cells, lbp.r, lbp.n_bins) for f in seq.frames])
    if feature == "HOOF":
        ref = seq.frames[0]
        out = np.zeros((len(seq), len(cells), bins))
        for t in range(1, len(seq)):
            flow = horn_schunck(ref, seq.frames[t])
            out[t] = [hoof(None, None, c, bins, flow=flow) for c in cells]
        return out
    raise ValueError(f"feature must be one of {FEATURES}, got {feature!r}")


def block_fd(features: np.ndarray, i: int, k: int) -> np.ndarray:
    """Chi-squared distance of every block of frame ``i`` to the mean of frames ``i-k`` and ``i+k``."""
    n = len(features)
    if not k <= i <= n - 1 - k:
        raise IndexError(f"frame {i} outside the valid range [{k}, {n - 1 - k}]")
    aff = 0.5 * (features[i - k] + features[i + k])
    return chi_squared(features[i], aff)


def initial_difference(features: np.ndarray, k: int, m: int = 12) -> np.ndarray:
    """Mean of the ``m`` largest block distances per frame; zero outside ``[k, n-1-k]``."""
    n, n_blocks = features.shape[:2]
    if n <= 2 * k:
        raise ValueError(f"sequence of {n} frames shorter than the {2 * k + 1}-frame window")
    if not 1 <= m <= n_blocks:
        raise ValueError(f"M must be in [1, {n_blocks}], got {m}")
    F = np.zeros(n)
    aff = 0.5 * (features[: n - 2 * k] + features[2 * k :])
    d = chi_squared(features[k : n - k], aff)  # (n - 2k, blocks)
    top = -np.sort(-d, axis=1)[:, :m]
    F[k : n - k] = top.mean(axis=1)
    return F


def contrast(F, k: int) -> np.ndarray:
    """``F_i - (F_{i-k} + F_{i+k}) / 2`` on ``[2k, n-1-2k]``, negatives clamped, zero elsewhere."""
    F = np.asarray(F, dtype=np.float64)
    n = len(F)
    C = np.zeros(n)
    if n > 4 * k:
        i = np.arange(2 * k, n - 2 * k)
        C[i] = np.maximum(F[i] - 0.5 * (F[i - k] + F[i + k]), 0.0)
    return C


def contrast_range(n: int, k: int) -> tuple[int, int]:
    """Half-open index range on which ``C`` is defined."""
    return 2 * k, max(n - 2 * k, 2 * k)


@dataclass(frozen=True)
class SpotResult:
    peaks: tuple[int, ...]
    k: int
    tau: float
    threshold: float

    @property
    def intervals(self) -> list[tuple[int, int]]:
        return [(p - self.k, p + self.k) for p in self.peaks]


def threshold(C, tau: float, valid=None) -> float:
    C = np.asarray(C, dtype=np.float64)
    vals = C if valid is None else C[valid[0] : valid[1]]
    if vals.size == 0:
        return 0.0
    mean, mx = float(vals.mean()), float(vals.max())
    # rounding must never put T above C_max or below C_mean
    return min(max(mean + tau * (mx - mean), mean), mx) if tau < 1 else mx


def detect_peaks(C, tau: float, k: int, valid=None) -> SpotResult:
    """Local maxima strictly above the threshold, greedily thinned to ``k/2`` spacing.

    ``valid`` is the half-open index range of defined ``C`` values; by
    default the contrast range for ``k``. Candidates are visited by
    descending height (earlier frame first on ties) and dropped if closer
    than ``k/2`` frames to an already-kept peak.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    C = np.asarray(C, dtype=np.float64)
    lo, hi = contrast_range(len(C), k) if valid is None else valid
    T = threshold(C, tau, (lo, hi))
    seg = C[lo:hi]
    if seg.size == 0:
        return SpotResult((), k, tau, T)
    padded = np.concatenate([[-np.inf], seg, [-np.inf]])
    mid = padded[1:-1]
    is_max = (mid > padded[:-2]) & (mid >= padded[2:]) & (mid > T)
    cand = np.flatnonzero(is_max) + lo
    order = sorted(cand.tolist(), key=lambda i: (-C[i], i))
    kept: list[int] = []
    min_dist = k / 2.0
    for i in order:
        if all(abs(i - j) >= min_dist for j in kept):
            kept.append(i)
    return SpotResult(tuple(sorted(kept)), k, tau, T)


@dataclass
class DifferenceSeries:
    F: np.ndarray
    C: np.ndarray
    k: int

    @property
    def valid(self) -> tuple[int, int]:
        return contrast_range(len(self.C), self.k)

    def peaks(self, tau: float) -> SpotResult:
        return detect_peaks(self.C, tau, self.k, self.valid)


# -- evaluation ------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    onset: int  # 0-based, inclusive
    offset: int
    label: str = ""

    def __len__(self):
        return self.offset - self.onset + 1


@dataclass
class SequenceTruth:
    n_frames: int
    intervals: list[Interval] = field(default_factory=list)

    def me_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_frames, dtype=bool)
        for iv in self.intervals:
            mask[max(iv.onset, 0) : iv.offset + 1] = True
        return mask


@dataclass(frozen=True)
class SpotScore:
    tpr: float
    fpr: float
    true_frames: int
    me_frames: int
    false_frames: int
    non_me_frames: int
    matched: dict  # sequence id -> {interval index: best peak}


def match_peaks(peaks, truth: SequenceTruth, n_window: int):
    """Assign each peak to the first GT interval whose tolerance window contains it.

    Returns ``(matches, false_peaks)`` where ``matches`` maps interval
    index to the list of peaks that hit it.
    """
    tol = (n_window - 1) / 4.0
    matches: dict[int, list[int]] = {}
    false = []
    for p in peaks:
        hit = None
        for j, iv in enumerate(truth.intervals):
            if iv.onset - tol <= p <= iv.offset + tol:
                hit = j
                break
        if hit is None:
            false.append(p)
        else:
            matches.setdefault(hit, []).append(p)
    return matches, false


def evaluate(results: dict, truth: dict, n_window: int) -> SpotScore:
    """Frame-based TPR/FPR over a set of sequences.

    ``results`` maps sequence id to a peak list (or SpotResult); ``truth``
    maps sequence id to :class:`SequenceTruth`. A matched interval credits
    all its frames once. Each false peak adds ``N`` false frames; FPR is
    capped at 1 when crowded false peaks would push it past that.
    """
    if not truth or not any(t.intervals for t in truth.values()):
        raise ValueError("empty ground truth")
    true_frames = me_frames = false_frames = non_me = 0
    matched = {}
    for sid in sorted(truth):
        gt = truth[sid]
        res = results.get(sid, ())
        peaks = res.peaks if isinstance(res, SpotResult) else tuple(res)
        mask = gt.me_mask()
        me_frames += int(mask.sum())
        non_me += int((~mask).sum())
        matches, false = match_peaks(peaks, gt, n_window)
        true_frames += sum(len(gt.intervals[j]) for j in matches)
        false_frames += n_window * len(false)
        matched[sid] = {j: ps[0] for j, ps in matches.items()}
    tpr = true_frames / me_frames if me_frames else 0.0
    fpr = min(false_frames / non_me, 1.0) if non_me else 0.0
    return SpotScore(tpr, fpr, true_frames, me_frames, false_frames, non_me, matched)


def auc(points) -> float:
    """Trapezoidal area under ``(fpr, tpr)`` points closed at (0,0) and (1,1)."""
    pts = sorted({(float(f), float(t)) for f, t in points} | {(0.0, 0.0), (1.0, 1.0)})
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    return float(np.sum(np.diff(xs) * 0.5 * (ys[1:] + ys[:-1])))


@dataclass
class RocCurve:
    taus: tuple[float, ...]
    tpr: tuple[float, ...]
    fpr: tuple[float, ...]
    auc: float

    def rows(self):
        return list(zip(self.taus, self.tpr, self.fpr))

    def best(self):
        """``(tau, tpr, fpr)`` maximising TPR - FPR (first on ties)."""
        return max(self.rows(), key=lambda r: r[1] - r[2])


def roc(series: dict, truth: dict, n_window: int, taus=TAU_GRID) -> RocCurve:
    """Sweep ``tau`` over precomputed difference series and score each setting."""
    tprs, fprs = [], []
    for tau in taus:
        res = {sid: s.peaks(tau) for sid, s in series.items()}
        score = evaluate(res, truth, n_window)
        tprs.append(score.tpr)
        fprs.append(score.fpr)
    return RocCurve(tuple(taus), tuple(tprs), tuple(fprs), auc(zip(fprs, tprs)))


# -- file formats ----------------------------------------------------------------


def read_ground_truth(path) -> dict[str, list[Interval]]:
    """``sequence_id,onset,offset,label`` rows with 1-based frames; header optional."""
    out: dict[str, list[Interval]] = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if row[0] == "sequence_id":
                continue
            sid, onset, offset = row[0], int(row[1]), int(row[2])
            label = row[3] if len(row) > 3 else ""
            if onset < 1 or offset < onset:
                raise ValueError(f"{path}: bad interval {onset}..{offset} for {sid}")
            out.setdefault(sid, []).append(Interval(onset - 1, offset - 1, label))
    return out


def write_ground_truth(path, truth: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sequence_id", "onset", "offset", "label"])
        for sid in sorted(truth):
            for iv in truth[sid]:
                w.writerow([sid, iv.onset + 1, iv.offset + 1, iv.label])


def write_roc(path, curve: RocCurve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "tpr", "fpr"])
        for tau, t, f in curve.rows():
            w.writerow([f"{tau:.2f}", repr(t), repr(f)])


# -- estimator -------------------------------------------------------------------


class FeatureDifferenceSpotter(BaseEstimator):
    """Spot rapid facial movements by contrasting block feature differences.

    Parameters
    ----------
    window_seconds : float
        Length of the micro-interval; ``N = round(window_seconds * fps)``, made odd.
    feature : {"LBP", "HOOF"}
    n_top_blocks : int
        ``M``, how many of the 36 largest block distances are averaged.
    tau : float
        Threshold fraction between the mean and the max of ``C``.
    """

    def __init__(self, window_seconds=0.32, feature="LBP", n_top_blocks=12, tau=0.15, lbp_p=8, lbp_r=3, track=True):
        self.window_seconds = window_seconds
        self.feature = feature
        self.n_top_blocks = n_top_blocks
        self.tau = tau
        self.lbp_p = lbp_p
        self.lbp_r = lbp_r
        self.track = track

    def fit(self, X=None, y=None):
        if self.feature not in FEATURES:
            raise ValueError(f"feature must be one of {FEATURES}, got {self.feature!r}")
        if not 1 <= self.n_top_blocks <= 36:
            raise ValueError("n_top_blocks must be in [1, 36]")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must be in [0, 1]")
        return self

    def window(self, fps: float) -> int:
        return window_length(self.window_seconds, fps)

    def difference_series(self, seq: FrameSequence, anchors) -> DifferenceSeries:
        """Track, correct, describe and contrast one sequence.

        ``anchors`` is the frame-0 triple (3, 2), or a (T, 3, 2) array of
        already-tracked points.
        """
        self.fit()
        anchors = np.asarray(anchors, dtype=np.float64)
        if anchors.ndim == 2:
            pts = track_points(seq, anchors) if self.track else np.repeat(anchors[None], len(seq), axis=0)
        else:
            pts = anchors
        corrected, grid = correct_and_grid(seq, pts)
        k = (self.window(seq.fps) - 1) // 2
        feats = block_features(corrected, grid, self.feature, LbpParams(self.lbp_p, self.lbp_r, True))
        F = initial_difference(feats, k, self.n_top_blocks)
        return DifferenceSeries(F, contrast(F, k), k)

    def predict(self, seq: FrameSequence, anchors) -> SpotResult:
        return self.difference_series(seq, anchors).peaks(self.tau)
