"""End-to-end spotting, recognition and combined runs over a dataset manifest."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from sklearn.pipeline import Pipeline

from .classify import LinearSVM, loso_evaluate
from .config import ALPHA_LEVELS, TIM_LENGTHS, ConfigError, PipelineConfig, load_manifest, require_files
from .features.descriptors import DESCRIPTORS, write_descriptors
from .geometry import (
    DegenerateGeometryError,
    Similarity,
    TrackingError,
    model_landmarks,
    read_anchor_file,
    read_landmark_file,
    register_clip,
    track_points,
)
from .magnify import MotionMagnifier
from .media import load_sequence
from .spotting import (
    TAU_GRID,
    FeatureDifferenceSpotter,
    SequenceTruth,
    evaluate,
    read_ground_truth,
    roc,
    write_roc,
)
from .tim import TemporalInterpolator

log = logging.getLogger(__name__)

# failures that only affect one sequence
SEQUENCE_ERRORS = (TrackingError, DegenerateGeometryError, ValueError, OSError)


class PipelineError(RuntimeError):
    """A run produced no usable result."""


def dump_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def _safe(fn, *args):
    try:
        return fn(*args), None
    except SEQUENCE_ERRORS as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _model_landmarks(cfg: PipelineConfig) -> np.ndarray:
    return read_landmark_file(cfg.model_landmarks) if cfg.model_landmarks else model_landmarks()


def _common_fps(records) -> float:
    rates = sorted({r.fps for r in records})
    if len(rates) != 1:
        raise ConfigError(f"all sequences must share one frame rate, got {rates}")
    return rates[0]


def load_truth(records) -> dict:
    truth = {}
    for path in sorted({str(r.ground_truth) for r in records if r.ground_truth}):
        try:
            rows = read_ground_truth(path)
        except (OSError, ValueError, IndexError) as exc:
            raise ConfigError(f"cannot read ground truth {path}: {exc}") from exc
        for sid, ivs in rows.items():
            truth.setdefault(sid, []).extend(ivs)
    return truth


# -- spotting --------------------------------------------------------------------


def make_spotter(cfg: PipelineConfig) -> FeatureDifferenceSpotter:
    s = cfg.spot
    return FeatureDifferenceSpotter(s.window_seconds, s.feature, s.n_top_blocks, s.tau, s.lbp_p, s.lbp_r)


def _spot_one(args):
    record, cfg = args

    def work():
        seq = load_sequence(record.dir, record.fps, record.id)
        pts = track_points(seq, read_anchor_file(record.anchors))
        series = make_spotter(cfg).difference_series(seq, pts)
        return len(seq), pts, series

    return record.id, _safe(work)


def spot_sequences(records, cfg: PipelineConfig):
    """Difference series per sequence; returns ``(results, failures)``.

    ``results`` maps id to ``(n_frames, tracked anchors, series)``.
    """
    outcomes = _map(_spot_one, [(r, cfg) for r in records], cfg.jobs)
    results, failures = {}, {}
    for sid, (value, err) in outcomes:
        if err is None:
            results[sid] = value
        else:
            log.warning("sequence %s skipped: %s", sid, err)
            failures[sid] = err
    if not results:
        raise PipelineError("every sequence failed: " + "; ".join(f"{k}: {v}" for k, v in sorted(failures.items())))
    return results, failures


def _truth_for(results, truth_rows):
    return {sid: SequenceTruth(n, list(truth_rows.get(sid, []))) for sid, (n, _, _) in results.items()}


def run_spot(manifest, cfg: PipelineConfig, out_dir=None) -> dict:
    records = load_manifest(manifest)
    require_files(records, "anchors", "ground_truth")
    fps = _common_fps(records)
    truth_rows = load_truth(records)
    spotter = make_spotter(cfg)
    n_window = spotter.window(fps)
    results, failures = spot_sequences(records, cfg)
    truth = _truth_for(results, truth_rows)
    series = {sid: r[2] for sid, r in results.items()}
    curve = roc(series, truth, n_window, TAU_GRID)
    score = evaluate({sid: s.peaks(cfg.spot.tau) for sid, s in series.items()}, truth, n_window)
    summary = {
        "auc": curve.auc,
        "n": len(results),
        "feature": cfg.spot.feature,
        "params": {
            "window_seconds": cfg.spot.window_seconds,
            "n_window": n_window,
            "n_top_blocks": cfg.spot.n_top_blocks,
            "lbp_p": cfg.spot.lbp_p,
            "lbp_r": cfg.spot.lbp_r,
            "taus": list(TAU_GRID),
        },
    }
    spots = {
        "tau": cfg.spot.tau,
        "tpr": score.tpr,
        "fpr": score.fpr,
        "peaks": {sid: [p + 1 for p in series[sid].peaks(cfg.spot.tau).peaks] for sid in sorted(series)},
        "failures": failures,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_roc(out / "roc.csv", curve)
        dump_json(out / "roc.json", summary)
        dump_json(out / "spots.json", spots)
    return {"summary": summary, "spots": spots, "roc": curve}


# -- recognition -----------------------------------------------------------------


def make_descriptor(cfg: PipelineConfig):
    d = cfg.descriptor
    cls = DESCRIPTORS[d.kind]
    if d.kind == "LBP":
        return cls(tuple(d.partition), d.combo, d.p, d.r)
    return cls(tuple(d.partition), d.combo, d.bins, d.global_norm)


def feature_pipeline(cfg: PipelineConfig) -> Pipeline:
    """Registered clip -> magnified -> time-normalised -> descriptor row."""
    m = cfg.magnify
    band = tuple(m.band) if m.band is not None else None
    return Pipeline([
        ("magnify", MotionMagnifier(m.alpha, m.gamma, band, m.levels)),
        ("tim", TemporalInterpolator(cfg.tim_length)),
        ("describe", make_descriptor(cfg)),
    ])


def recognition_pipeline(cfg: PipelineConfig) -> Pipeline:
    c = cfg.classifier
    return Pipeline(feature_pipeline(cfg).steps + [("svm", LinearSVM(C=c.C, standardize=c.standardize))])


def describe(clips, cfg: PipelineConfig) -> np.ndarray:
    return feature_pipeline(cfg).fit_transform(clips)


def _register_one(args):
    record, model = args

    def work():
        seq = load_sequence(record.dir, record.fps, record.id)
        return register_clip(seq, read_landmark_file(record.landmarks), model)

    return record.id, _safe(work)


def register_records(records, cfg: PipelineConfig):
    model = _model_landmarks(cfg)
    outcomes = _map(_register_one, [(r, model) for r in records], cfg.jobs)
    clips, failures = {}, {}
    for cid, (clip, err) in outcomes:
        if err is None:
            clips[cid] = clip
        else:
            log.warning("clip %s skipped: %s", cid, err)
            failures[cid] = err
    return clips, failures


def _evaluate_setting(clips, labels, groups, cfg):
    X = describe(clips, cfg)
    c = cfg.classifier
    return X, loso_evaluate(X, labels, groups, c.C, c.standardize, c.mode)


def run_recognize(manifest, cfg: PipelineConfig, out_dir=None, sweep: str | None = None) -> dict:
    records = load_manifest(manifest)
    require_files(records, "landmarks")
    missing = [r.id for r in records if not r.label]
    if missing:
        raise ConfigError(f"clips without a label: {missing[:5]}")
    clips, failures = register_records(records, cfg)
    kept = [r for r in records if r.id in clips]
    if len({r.subject for r in kept}) < 2 and cfg.classifier.mode == "subject":
        raise PipelineError("leave-one-subject-out needs clips from at least two subjects")
    if len({r.label for r in kept}) < 2:
        raise PipelineError("recognition needs at least two classes")
    seqs = [clips[r.id] for r in kept]
    labels = np.array([r.label for r in kept])
    groups = np.array([r.subject for r in kept])

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    if sweep is not None:
        settings = sweep_settings(cfg, sweep)
        rows = []
        for value, sub in settings:
            _, rep = _evaluate_setting(seqs, labels, groups, sub)
            rows.append({sweep: value, "accuracy": rep.accuracy})
        report = {"sweep": sweep, "results": rows, "n": len(kept), "failures": failures, "config": cfg.to_dict()}
        if out is not None:
            dump_json(out / f"sweep_{sweep}.json", report)
        return report

    X, rep = _evaluate_setting(seqs, labels, groups, cfg)
    report = rep.to_dict()
    report.update({
        "n": len(kept),
        "failures": failures,
        "predictions": {kept[i].id: str(p) for i, p in sorted(rep.predictions.items())},
        "config": cfg.to_dict(),
    })
    if out is not None:
        layout = feature_pipeline(cfg).fit(seqs[:1]).named_steps["describe"].layout_
        write_descriptors(out / "descriptors.csv", [r.id for r in kept], labels, X, layout)
        c = cfg.classifier
        model = LinearSVM(C=c.C, standardize=c.standardize).fit(X, labels)
        (out / "model.json").write_text(model.to_json() + "\n")
        dump_json(out / "report.json", report)
    return report


def sweep_settings(cfg: PipelineConfig, sweep: str):
    if sweep == "alpha":
        return [(a, replace(cfg, magnify=replace(cfg.magnify, alpha=float(a)))) for a in ALPHA_LEVELS]
    if sweep == "tim":
        return [("none" if n is None else n, replace(cfg, tim_length=n)) for n in TIM_LENGTHS]
    raise ConfigError(f"unknown sweep {sweep!r}; choose alpha or tim")


# -- combined spotting and recognition --------------------------------------------


def landmarks_at(first_landmarks, tracked, frame: int) -> np.ndarray:
    """Carry frame-0 landmarks to ``frame`` with the eye-corner similarity."""
    sim = Similarity.from_pairs(tracked[0, 0], tracked[0, 1], tracked[frame, 0], tracked[frame, 1])
    return sim(first_landmarks)


def _excerpt_clip(seq, tracked, first_lm, start, stop, model):
    """Register ``seq[start:stop]`` using landmarks carried to ``start``."""
    start = max(start, 0)
    stop = min(stop, len(seq))
    part = seq.excerpt(start, stop)
    return register_clip(part, landmarks_at(first_lm, tracked, start), model)


def run_mesr(manifest, cfg: PipelineConfig, out_dir=None) -> dict:
    """Spot at ``cfg.spot.tau`` then recognise each true spot with a classifier
    trained on the labelled intervals of the other subjects."""
    records = load_manifest(manifest)
    require_files(records, "anchors", "landmarks", "ground_truth")
    fps = _common_fps(records)
    truth_rows = load_truth(records)
    spotter = make_spotter(cfg)
    n_window = spotter.window(fps)
    k = (n_window - 1) // 2
    model = _model_landmarks(cfg)
    results, failures = spot_sequences(records, cfg)
    truth = _truth_for(results, truth_rows)
    spots = {sid: r[2].peaks(cfg.spot.tau) for sid, r in results.items()}
    score = evaluate(spots, truth, n_window)
    subject_of = {r.id: r.subject for r in records}
    by_id = {r.id: r for r in records}
    first_lm = {r.id: read_landmark_file(r.landmarks) for r in records if r.id in results}

    # labelled training clips: every GT interval
    train_X, train_y, train_g = [], [], []
    for sid in sorted(results):
        _, pts, _ = results[sid]
        seq = load_sequence(by_id[sid].dir, by_id[sid].fps, sid)
        for iv in truth[sid].intervals:
            got, err = _safe(_excerpt_clip, seq, pts, first_lm[sid], iv.onset, iv.offset + 1, model)
            if err is not None:
                failures[f"{sid}@{iv.onset + 1}"] = err
                continue
            train_X.append(got)
            train_y.append(iv.label)
            train_g.append(subject_of[sid])
    if not train_X:
        raise PipelineError("no labelled interval could be extracted")
    Xtr = describe(train_X, cfg)
    ytr = np.array(train_y)
    gtr = np.array(train_g)

    # test clips: [peak - k, peak + k] around each true spot
    tests = []
    for sid in sorted(score.matched):
        if not score.matched[sid]:
            continue
        _, pts, _ = results[sid]
        seq = load_sequence(by_id[sid].dir, by_id[sid].fps, sid)
        for j, peak in sorted(score.matched[sid].items()):
            iv = truth[sid].intervals[j]
            got, err = _safe(_excerpt_clip, seq, pts, first_lm[sid], peak - k, peak + k + 1, model)
            if err is not None:
                failures[f"{sid}@{peak + 1}"] = err
                continue
            tests.append((sid, peak, iv.label, got))
    Xte = describe([t[3] for t in tests], cfg) if tests else np.zeros((0, Xtr.shape[1]))

    c = cfg.classifier
    correct = 0
    per_subject = {}
    spotted = []
    for subject in sorted({subject_of[t[0]] for t in tests}):
        rows = [i for i, t in enumerate(tests) if subject_of[t[0]] == subject]
        train = gtr != subject
        if len(set(ytr[train].tolist())) < 2:
            preds = [None] * len(rows)
        else:
            clf = LinearSVM(C=c.C, standardize=c.standardize).fit(Xtr[train], ytr[train])
            preds = clf.predict(Xte[rows]).tolist()
        hits = 0
        for i, p in zip(rows, preds):
            sid, peak, label, _ = tests[i]
            ok = p == label
            hits += ok
            spotted.append({"sequence_id": sid, "peak": peak + 1, "label": label, "predicted": p, "correct": bool(ok)})
        correct += hits
        per_subject[subject] = {"n": len(rows), "correct": hits}
    accuracy = correct / len(tests) if tests else 0.0
    report = {
        "spotting": {"tpr": score.tpr, "fpr": score.fpr, "tau": cfg.spot.tau, "n_sequences": len(results),
                     "true_spots": len(tests)},
        "recognition": {"accuracy": accuracy, "correct": correct, "n": len(tests), "per_subject": per_subject},
        "overall": score.tpr * accuracy,
        "spots": spotted,
        "failures": failures,
        "config": cfg.to_dict(),
    }
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        dump_json(Path(out_dir) / "mesr.json", report)
    return report
