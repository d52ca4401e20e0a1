"""Synthetic corpora for exercising spotting, recognition and the combined system.

Faces are smooth random textures with face-like blobs (see
:func:`microexpr.media.textured_face`); micro-motions are brief local
translations injected by :func:`microexpr.media.synthesize_transient`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .geometry import Similarity, write_anchor_file, write_landmark_file
from .media import FrameSequence, TransientSpec, quantize, save_sequence, synthesize_transient, textured_face

# class id -> motion direction (radians, y down) and the face region it moves in
CLASS_MOTIONS = {
    "positive": (-np.pi / 2, "mouth"),  # mouth region moves up
    "negative": (np.pi / 2, "brow"),  # brow region moves down
    "surprise": (-np.pi / 2, "brow"),  # brow region moves up
}


def canonical_landmarks(width: int = 128, height: int = 128) -> np.ndarray:
    """A 68-point frontal layout matching the geometry of ``textured_face``."""
    w, h = float(width), float(height)
    cx, cy = w / 2.0, h / 2.0
    eye_y = cy - 0.12 * h
    iod_inner = 0.25 * w
    nose_y = eye_y + 0.22 * h
    mouth_y = nose_y + 0.12 * h
    pts = []
    # jaw 0-16: a lopsided U so no local support set lies on a single conic
    for i, phi in enumerate(np.linspace(-0.5 * np.pi, 0.5 * np.pi, 17)):
        rx, ry = 0.40 * w, 0.40 * h
        pts.append((cx + rx * np.sin(phi),
                    eye_y + 0.02 * h + ry * np.cos(phi) ** 1.3 + 0.004 * h * np.sin(3.1 * i)))
    # brows 17-26
    for side in (-1, 1):
        xs = np.linspace(0.36 * w, 0.10 * w, 5) if side < 0 else np.linspace(0.10 * w, 0.36 * w, 5)
        for j, dx in enumerate(xs):
            arch = 0.03 * h * np.sin(np.pi * (j + 0.5) / 5.0)
            pts.append((cx + side * dx, eye_y - 0.10 * h - arch))
    # nose bridge 27-30 then nostrils 31-35
    for j in range(4):
        pts.append((cx, eye_y + (j / 3.0) * (nose_y - eye_y - 0.02 * h)))
    for dx, dy in ((-0.07, 0.0), (-0.035, 0.012), (0.0, 0.018), (0.035, 0.012), (0.07, 0.0)):
        pts.append((cx + dx * w, nose_y + dy * h))
    # eyes 36-47: six points each, outer corner first, clockwise
    for side in (-1, 1):
        inner = cx + side * iod_inner / 2.0
        outer = inner + side * 0.16 * w
        ring = []
        for ang in np.linspace(0, 2 * np.pi, 7)[:-1]:
            t = 0.5 - 0.5 * np.cos(ang)
            x = outer + (inner - outer) * t
            y = eye_y - 0.025 * h * np.sin(ang) * (1.0 if side < 0 else 1.05)
            ring.append((x, y))
        pts.extend(ring)
    # outer lip 48-59, inner lip 60-67
    for ang in np.linspace(0, 2 * np.pi, 13)[:-1]:
        pts.append((cx - 0.15 * w * np.cos(ang), mouth_y - 0.045 * h * np.sin(ang) * (1.2 if np.sin(ang) > 0 else 1.0)))
    for ang in np.linspace(0, 2 * np.pi, 9)[:-1]:
        pts.append((cx - 0.10 * w * np.cos(ang), mouth_y - 0.015 * h * np.sin(ang)))
    lm = np.asarray(pts, dtype=np.float64)
    assert lm.shape == (68, 2)
    return lm


# face regions in canonical 128x128 coordinates, (x, y, w, h)
REGIONS = {
    "brow": (30, 26, 68, 14),
    "brow_left": (30, 26, 28, 16),
    "brow_right": (70, 26, 28, 16),
    "mouth": (44, 84, 40, 16),
}
FACE_SIZE = (128, 128)


@dataclass(frozen=True)
class PlacedFace:
    image: np.ndarray
    anchors: np.ndarray  # (3, 2)
    landmarks: np.ndarray  # (68, 2)
    pose: Similarity  # canonical -> image coordinates

    def region(self, name: str) -> tuple[int, int, int, int]:
        """Axis-aligned integer box around a canonical region after posing."""
        x, y, w, h = REGIONS[name]
        corners = self.pose(np.array([[x, y], [x + w, y], [x, y + h], [x + w, y + h]], dtype=np.float64))
        lo = np.floor(corners.min(axis=0)).astype(int)
        hi = np.ceil(corners.max(axis=0)).astype(int)
        fh, fw = self.image.shape
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, [fw, fh])
        return int(lo[0]), int(lo[1]), int(hi[0] - lo[0]), int(hi[1] - lo[1])


def place_face(seed: int, pose: Similarity = Similarity(), smoothness: float = 3.5) -> PlacedFace:
    """Render a textured face under a similarity pose with matching anchors and landmarks."""
    base, anchors = textured_face(FACE_SIZE, seed=seed, smoothness=smoothness)
    if pose == Similarity():
        image = base
    else:
        h, w = base.shape
        yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
        src = pose.inverse()(np.stack([xx, yy], axis=-1))
        image = ndimage.map_coordinates(base, [src[..., 1], src[..., 0]], order=3, mode="nearest")
        image = np.clip(image, 0.0, 1.0)
    return PlacedFace(image, pose(anchors), pose(canonical_landmarks(*FACE_SIZE[::-1])), pose)


def random_pose(rng: np.random.Generator, shift: float = 3.0, rotation: float = 0.05, scale: float = 0.04) -> Similarity:
    """Small random similarity about the canonical face centre."""
    c = complex(FACE_SIZE[1] / 2.0, FACE_SIZE[0] / 2.0)
    a = (1.0 + rng.uniform(-scale, scale)) * np.exp(1j * rng.uniform(-rotation, rotation))
    t = complex(rng.uniform(-shift, shift), rng.uniform(-shift, shift))
    return Similarity(a, c - a * c + t)


def _write_clip(out: Path, rel: str, seq: FrameSequence) -> str:
    save_sequence(seq.with_frames(quantize(seq.frames)), out / rel)
    return rel


def _write_truth(path: Path, rows) -> None:
    """Ground truth CSV, 1-based inclusive frames."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sequence_id", "onset", "offset", "label"])
        for row in rows:
            writer.writerow(row)


def _multi_transient(face: PlacedFace, events, length, drift, drift_direction, noise, fps, id, seed):
    """Sequence with several transients ``(onset, offset, region, direction, amplitude)`` plus drift and noise."""
    frames = np.repeat(face.image[None], length, axis=0).copy()
    for onset, offset, region, direction, amplitude in events:
        clip = synthesize_transient(
            face.image, onset, offset, length, face.region(region),
            TransientSpec(amplitude=amplitude, direction=direction),
        )
        sl = slice(onset, offset + 1)
        frames[sl] += clip.frames[sl] - face.image[None]
    rng = np.random.default_rng(seed)
    ux, uy = np.cos(drift_direction), np.sin(drift_direction)
    for t in range(length):
        f = frames[t]
        if drift:
            f = ndimage.shift(f, (t * drift * uy, t * drift * ux), order=3, mode="nearest")
        if noise:
            f = f + rng.normal(0.0, noise, f.shape)
        frames[t] = np.clip(f, 0.0, 1.0)
    return FrameSequence(frames, fps, id)


def spotting_corpus(
    out_dir,
    n_sequences: int = 30,
    length: int = 200,
    fps: float = 25.0,
    duration: int = 8,
    amplitude: float = 2.0,
    drift: float = 0.1,
    noise: float = 0.003,
    seed: int = 0,
) -> Path:
    """Long sequences with one labelled transient each; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _mk(out / "anchors")
    rng = np.random.default_rng(seed)
    records, truth = [], []
    regions = ("brow_left", "brow_right", "mouth")
    for i in range(n_sequences):
        sid = f"seq{i:03d}"
        face = place_face(seed * 1000 + i)
        onset = int(rng.integers(30, length - 30 - duration))
        region = regions[i % len(regions)]
        direction = float(rng.choice([-np.pi / 2, np.pi / 2, 0.0, np.pi]))
        seq = _multi_transient(
            face, [(onset, onset + duration, region, direction, amplitude)], length,
            drift, float(rng.uniform(0, 2 * np.pi)), noise, fps, sid, seed * 1000 + i,
        )
        _write_clip(out, f"frames/{sid}", seq)
        write_anchor_file(out / f"anchors/{sid}.csv", face.anchors)
        records.append({"id": sid, "dir": f"frames/{sid}", "fps": fps, "subject": f"s{i:03d}",
                        "anchors": f"anchors/{sid}.csv", "ground_truth": "ground_truth.csv"})
        truth.append((sid, onset + 1, onset + duration + 1, "me"))
    _write_truth(out / "ground_truth.csv", truth)
    return _finish(out, records)


def recognition_corpus(
    out_dir,
    n_subjects: int = 6,
    clips_per_class: int = 4,
    fps: float = 25.0,
    amplitude: float = 1.0,
    noise: float = 0.003,
    seed: int = 0,
) -> Path:
    """Short onset-to-offset clips of three motion classes, with frame-1 landmarks."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _mk(out / "landmarks")
    rng = np.random.default_rng(seed)
    records = []
    for s in range(n_subjects):
        subject = f"s{s:02d}"
        face_seed = seed * 1000 + s
        for label, (direction, region) in sorted(CLASS_MOTIONS.items()):
            for j in range(clips_per_class):
                cid = f"{subject}_{label}_{j}"
                face = place_face(face_seed, random_pose(rng))
                n = int(rng.integers(9, 14))
                seq = _multi_transient(face, [(1, n - 2, region, direction, amplitude)], n, 0.0, 0.0, noise, fps, cid,
                                       int(rng.integers(2**31)))
                _write_clip(out, f"frames/{cid}", seq)
                write_landmark_file(out / f"landmarks/{cid}.csv", face.landmarks)
                records.append({"id": cid, "dir": f"frames/{cid}", "fps": fps, "subject": subject,
                                "landmarks": f"landmarks/{cid}.csv", "label": label})
    return _finish(out, records)


def mesr_corpus(
    out_dir,
    n_subjects: int = 6,
    sequences_per_subject: int = 2,
    events_per_sequence: int = 2,
    length: int = 150,
    fps: float = 25.0,
    duration: int = 8,
    amplitude: float = 2.0,
    drift: float = 0.05,
    noise: float = 0.003,
    seed: int = 0,
) -> Path:
    """Long sequences with several labelled transients, frame-1 anchors and landmarks."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _mk(out / "anchors")
    _mk(out / "landmarks")
    rng = np.random.default_rng(seed)
    labels = sorted(CLASS_MOTIONS)
    records, truth = [], []
    counter = 0
    for s in range(n_subjects):
        subject = f"s{s:02d}"
        for q in range(sequences_per_subject):
            sid = f"{subject}_seq{q}"
            face = place_face(seed * 1000 + s, random_pose(rng))
            # evenly spaced slots keep transients apart
            slot = (length - 40) // events_per_sequence
            events = []
            for e in range(events_per_sequence):
                onset = 20 + e * slot + int(rng.integers(0, max(slot - duration - 10, 1)))
                label = labels[counter % len(labels)]
                counter += 1
                direction, region = CLASS_MOTIONS[label]
                events.append((onset, onset + duration, region, direction, amplitude))
                truth.append((sid, onset + 1, onset + duration + 1, label))
            seq = _multi_transient(face, events, length, drift, float(rng.uniform(0, 2 * np.pi)), noise, fps, sid,
                                   int(rng.integers(2**31)))
            _write_clip(out, f"frames/{sid}", seq)
            write_anchor_file(out / f"anchors/{sid}.csv", face.anchors)
            write_landmark_file(out / f"landmarks/{sid}.csv", face.landmarks)
            records.append({"id": sid, "dir": f"frames/{sid}", "fps": fps, "subject": subject,
                            "anchors": f"anchors/{sid}.csv", "landmarks": f"landmarks/{sid}.csv",
                            "ground_truth": "ground_truth.csv"})
    _write_truth(out / "ground_truth.csv", truth)
    return _finish(out, records)


CORPORA = {"spot": spotting_corpus, "recognize": recognition_corpus, "mesr": mesr_corpus}


def _mk(path: Path) -> bool:
    path.mkdir(parents=True, exist_ok=True)
    return True


def _finish(out: Path, records) -> Path:
    path = out / "manifest.json"
    path.write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")
    return path
