"""Acceptance checks. Each test prints one PASS/FAIL line and asserts it."""

import csv
import json
import time

import numpy as np
import pytest

from microexpr.classify import COST_GRID, LinearSVM, loso_evaluate, train_binary
from microexpr.cli import main
from microexpr.config import ALPHA_LEVELS
from microexpr.features.descriptors import PlaneCombination, higo_top, hog_top, lbp_top, select_planes
from microexpr.features.gradients import gradient, higo_histogram, hog_histogram, orientation_histogram
from microexpr.features.lbp import LbpParams, lbp_code, transitions, uniform_table
from microexpr.magnify import magnify
from microexpr.spotting import TAU_GRID, contrast, detect_peaks, initial_difference
from microexpr.tim import tim_fit, tim_resample
from oscillation import amplitude, oscillating_clip


def _report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[acceptance {n:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _cli(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    assert code == 0, f"{argv[0]} exited with {code}"
    return out.strip()


# -- shared end-to-end runs -------------------------------------------------------


def _spot_run(root, capsys):
    t0 = time.perf_counter()
    manifest = _cli(["synth", "spot", "--out", root / "corpus", "--seed", 0], capsys)
    _cli(["spot", manifest, "--out", root / "out"], capsys)
    return root / "out", time.perf_counter() - t0


def _mesr_run(root, capsys):
    t0 = time.perf_counter()
    manifest = _cli(["synth", "mesr", "--out", root / "corpus", "--seed", 0], capsys)
    _cli(["mesr", manifest, "--out", root / "out"], capsys)
    return root / "out", time.perf_counter() - t0


@pytest.fixture(scope="module")
def runs():
    return {}


def _cached(runs, key, make):
    if key not in runs:
        runs[key] = make()
    return runs[key]


# -- 1. feature-difference arithmetic ------------------------------------------------


def _oracle_chi2(h, g):
    total = 0.0
    for a, b in zip(h, g):
        if a + b > 0:
            total += (a - b) ** 2 / (a + b)
    return total


def _oracle_F(features, k, m):
    n = len(features)
    F = np.zeros(n)
    for i in range(k, n - k):
        aff = (features[i - k] + features[i + k]) / 2
        d = sorted((_oracle_chi2(features[i, b], aff[b]) for b in range(features.shape[1])), reverse=True)
        F[i] = sum(d[:m]) / m
    return F


def _oracle_C(F, k):
    n = len(F)
    C = np.zeros(n)
    for i in range(2 * k, n - 2 * k):
        C[i] = max(F[i] - (F[i - k] + F[i + k]) / 2, 0.0)
    return C


def _oracle_peaks(C, tau, k):
    n = len(C)
    lo, hi = 2 * k, n - 2 * k
    vals = C[lo:hi]
    T = vals.max() if tau == 1 else vals.mean() + tau * (vals.max() - vals.mean())
    cands = []
    for i in range(lo, hi):
        left = C[i - 1] if i > lo else -np.inf
        right = C[i + 1] if i < hi - 1 else -np.inf
        if C[i] > left and C[i] >= right and C[i] > T:
            cands.append(i)
    kept = []
    while cands:
        best = max(cands, key=lambda i: (C[i], -i))
        kept.append(best)
        cands = [i for i in cands if abs(i - best) >= k / 2]
    return sorted(kept)


def test_criterion_1_fd_arithmetic(capsys):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    bad = []
    for trial in range(100):
        k = (4, 16, 32)[trial % 3]
        tau = float(rng.choice(TAU_GRID))
        # random F vectors go straight into contrast and peak detection
        F = rng.random(200)
        C = _oracle_C(F, k)
        if not np.array_equal(contrast(F, k), C) or list(detect_peaks(C, tau, k).peaks) != _oracle_peaks(C, tau, k):
            bad.append(trial)
    # initial difference against the brute-force top-M mean on random block histograms
    for trial in range(10):
        k = (4, 16, 32)[trial % 3]
        feats = rng.random((200, 12, 10))
        feats /= feats.sum(axis=2, keepdims=True)
        if not np.allclose(initial_difference(feats, k, 6), _oracle_F(feats, k, 6), rtol=1e-12, atol=0):
            bad.append(f"F{trial}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 5
    _report(capsys, 1, ok, f"100 F vectors, k in (4,16,32): mismatches={bad}, {elapsed:.2f}s (< 5s)")


# -- 2. synthetic spotting ----------------------------------------------------------


def test_criterion_2_synthetic_spotting(runs, tmp_path_factory, capsys):
    out, elapsed = _cached(runs, "spot_a", lambda: _spot_run(tmp_path_factory.mktemp("spot_a"), capsys))
    summary = json.loads((out / "roc.json").read_text())
    with open(out / "roc.csv") as fh:
        rows = [(float(r["tau"]), float(r["tpr"]), float(r["fpr"])) for r in csv.DictReader(fh)]
    tau, tpr, fpr = max(rows, key=lambda r: r[1] - r[2])
    ok = summary["auc"] >= 0.95 and tpr >= 0.9 and fpr <= 0.1 and summary["n"] == 30 and elapsed < 120
    _report(capsys, 2, ok, f"AUC={summary['auc']:.4f}, best tau={tau:.2f}: TPR={tpr:.3f} FPR={fpr:.4f}, {elapsed:.0f}s (< 120s)")


# -- 3. descriptor oracles ---------------------------------------------------------


def _hand_values():
    raw = LbpParams(8, 2, uniform=False)
    const = np.full((5, 5), 0.3)
    spike = np.zeros((5, 5))
    spike[2, 2] = 1.0
    ramp = np.tile(np.arange(5) / 4.0, (5, 1))
    step = np.zeros((5, 5))
    step[:, 2:] = 1.0  # centre sits on the bright side of the edge
    a = 0.1
    shallow = np.tile(np.arange(5) * a / 2, (5, 1))
    steep = np.tile((np.arange(5) * 4 * a / 2)[:, None], (1, 5))
    (t1, m1), (t2, m2) = gradient(shallow), gradient(steep)
    theta, m = np.concatenate([t1.ravel(), t2.ravel()]), np.concatenate([m1.ravel(), m2.ravel()])
    one_bin = np.eye(8)[4]
    checks = {
        "lbp constant": lbp_code(const, 2, 2, raw) == 255,
        "lbp constant uniform": lbp_code(const, 2, 2, LbpParams(8, 2)) == uniform_table(8)[255],
        "lbp spike": lbp_code(spike, 2, 2, raw) == 0,
        "lbp ramp": lbp_code(ramp, 2, 2, raw) == 0b11000111,
        "lbp step uniform": transitions(lbp_code(step, 2, 2, raw), 8) == 2,
        "hog ramp": np.array_equal(hog_histogram(ramp), one_bin),
        "higo ramp": np.array_equal(higo_histogram(ramp), one_bin),
        "hog two ramps": np.allclose(orientation_histogram(theta, m, 8, weighted=True)[[4, 6]], [0.2, 0.8]),
        "higo two ramps": np.allclose(orientation_histogram(theta, m, 8, weighted=False)[[4, 6]], [0.5, 0.5]),
        "higo x3": np.array_equal(higo_histogram(3 * ramp), higo_histogram(ramp)),
        "hog x3": np.allclose(hog_histogram(3 * ramp), hog_histogram(ramp)),
    }
    return [name for name, ok in checks.items() if not ok]


def test_criterion_3_descriptor_oracles(capsys):
    t0 = time.perf_counter()
    wrong = _hand_values()
    rng = np.random.default_rng(3)
    broken = 0
    for _ in range(50):
        img = rng.random((24, 24))
        theta, m = gradient(img)
        base = orientation_histogram(theta, m, 8, weighted=False)
        # orientation kept, magnitudes remapped by a random positive function
        f = m * (1.0 + 10 * rng.random(m.shape))
        same_field = np.array_equal(orientation_histogram(theta, f, 8, weighted=False), base)
        # pixel scaling by a power of two moves every magnitude without touching any angle
        same_image = np.array_equal(higo_histogram(img * 2.0 ** rng.integers(-6, 7)), higo_histogram(img))
        broken += not (same_field and same_image)
    elapsed = time.perf_counter() - t0
    ok = not wrong and broken == 0 and elapsed < 10
    _report(capsys, 3, ok, f"hand values wrong={wrong}, HIGO remaps broken={broken}/50, {elapsed:.2f}s (< 10s)")


# -- 4. plane slicing --------------------------------------------------------------


def test_criterion_4_plane_slicing(capsys):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(20):
        clip = rng.random((int(rng.integers(8, 14)), 24, 24))
        tops = {
            "lbp": lambda c: lbp_top(clip, (2, 2, 2), c, LbpParams(8, 2)),
            "hog": lambda c: hog_top(clip, (2, 2, 2), c, global_norm=None),
            "higo": lambda c: higo_top(clip, (2, 2, 2), c, global_norm=None),
        }
        for make in tops.values():
            top = make("TOP")
            for combo in ("XOT", "YOT", "XYOT"):
                bad += not np.array_equal(select_planes(top.values, top.layout, combo), make(combo).values)
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 30
    _report(capsys, 4, ok, f"20 clips x 3 descriptors x 3 combos, mismatches={bad}, {elapsed:.1f}s (< 30s)")


# -- 5. TIM exactness --------------------------------------------------------------


def test_criterion_5_tim_exactness(capsys):
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    worst, lengths = 0.0, set()
    for _ in range(20):
        n = int(rng.integers(4, 35))
        clip = rng.random((n, 16, 16))
        model = tim_fit(clip)
        worst = max(worst, float(np.abs(model.evaluate(np.arange(n) / (n - 1)) - clip).max()))
        lengths.add(len(tim_resample(model, 10)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and lengths == {10} and elapsed < 30
    _report(capsys, 5, ok, f"max error {worst:.2e} (< 1e-6), TIM10 lengths={sorted(lengths)}, {elapsed:.1f}s (< 30s)")


# -- 6. magnification gain ---------------------------------------------------------


def test_criterion_6_magnification(capsys):
    t0 = time.perf_counter()
    seq, base = oscillating_clip()
    amp4 = amplitude(magnify(seq, alpha=4).frames, base)
    drift1 = float(np.abs(magnify(seq, alpha=1).frames - seq.frames).mean())
    elapsed = time.perf_counter() - t0
    ok = 1.5 <= amp4 <= 2.5 and drift1 < 1e-3 and elapsed < 60
    _report(capsys, 6, ok, f"alpha=4 amplitude {amp4:.3f}px in [1.5, 2.5], alpha=1 mean|dI|={drift1:.1e} (< 1e-3), {elapsed:.1f}s")


# -- 7. SVM ------------------------------------------------------------------------


def test_criterion_7_svm(capsys):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    non_monotone = 0
    for _ in range(50):
        X = rng.normal(size=(40, 6))
        y = np.where(rng.random(40) < 0.5, 1.0, -1.0)
        _, _, hist = train_binary(X, y, C=float(rng.choice(COST_GRID)))
        non_monotone += bool(np.any(np.diff(hist) < -1e-10))
    X = rng.normal(size=(80, 2))
    X[:, 1] += np.sign(X[:, 1]) * 0.5
    y = np.where(X[:, 1] > 0, "up", "down")
    train_acc = LinearSVM(C=100).fit(X, y).score(X, y)
    accs = []
    for _ in range(50):
        Xr = rng.normal(size=(30, 8))
        yr = rng.permutation(np.repeat(["a", "b", "c"], 10))
        accs.append(loso_evaluate(Xr, yr, np.repeat(np.arange(5), 6), C="auto").accuracy)
    chance = float(np.mean(accs))
    elapsed = time.perf_counter() - t0
    ok = non_monotone == 0 and train_acc == 1.0 and abs(chance - 1 / 3) <= 0.1 and elapsed < 120
    _report(capsys, 7, ok, f"non-monotone duals={non_monotone}/50, separable acc={train_acc:.2f}, "
            f"shuffled LOSO acc={chance:.3f} (1/3 +- 0.1), {elapsed:.0f}s (< 120s)")


# -- 8. end-to-end MESR ------------------------------------------------------------


def test_criterion_8_mesr(runs, tmp_path_factory, capsys):
    out, elapsed = _cached(runs, "mesr_a", lambda: _mesr_run(tmp_path_factory.mktemp("mesr_a"), capsys))
    rep = json.loads((out / "mesr.json").read_text())
    tpr, acc, overall = rep["spotting"]["tpr"], rep["recognition"]["accuracy"], rep["overall"]
    classes = {s["label"] for s in rep["spots"]}
    ok = overall >= 0.6 and overall == pytest.approx(tpr * acc, rel=1e-12, abs=1e-15) and len(classes) == 3 and elapsed < 300
    _report(capsys, 8, ok, f"overall={overall:.3f} (>= 0.6) = TPR {tpr:.3f} x acc {acc:.3f}, "
            f"{rep['recognition']['n']} true spots, {elapsed:.0f}s (< 300s)")


# -- 9. protocol shapes ------------------------------------------------------------


def test_criterion_9_protocol_shapes(runs, tmp_path_factory, recognition_manifest, tmp_path, capsys):
    out, _ = _cached(runs, "spot_a", lambda: _spot_run(tmp_path_factory.mktemp("spot_a"), capsys))
    with open(out / "roc.csv") as fh:
        taus = [float(r["tau"]) for r in csv.DictReader(fh)]
    sweeps = {}
    for name in ("alpha", "tim"):
        _cli(["eval", name, recognition_manifest, "--out", tmp_path], capsys)
        sweeps[name] = [row[name] for row in json.loads((tmp_path / f"sweep_{name}.json").read_text())["results"]]
    checks = {
        "tau": taus == [round(0.05 * i, 2) for i in range(21)],
        "alpha": sweeps["alpha"] == [1, 2, 4, 8, 12, 16, 20, 24, 30] == list(ALPHA_LEVELS),
        "tim": sweeps["tim"] == ["none", 10, 20, 30, 40, 50, 60, 70, 80],
        "cost": list(COST_GRID) == [0.1, 1, 2, 10, 100, 1000],
        "combos": {c.value for c in PlaneCombination} >= {"TOP", "XYOT", "XOT", "YOT"},
    }
    wrong = [k for k, v in checks.items() if not v]
    _report(capsys, 9, not wrong, f"{len(taus)} ROC points, alpha levels {sweeps['alpha']}, TIM {sweeps['tim']}, "
            f"{len(COST_GRID)} costs; wrong={wrong}")


# -- 10. determinism ---------------------------------------------------------------


def test_criterion_10_determinism(runs, tmp_path_factory, capsys):
    spot_a, _ = _cached(runs, "spot_a", lambda: _spot_run(tmp_path_factory.mktemp("spot_a"), capsys))
    mesr_a, _ = _cached(runs, "mesr_a", lambda: _mesr_run(tmp_path_factory.mktemp("mesr_a"), capsys))
    spot_b, _ = _spot_run(tmp_path_factory.mktemp("spot_b"), capsys)
    mesr_b, _ = _mesr_run(tmp_path_factory.mktemp("mesr_b"), capsys)
    files = [(spot_a, spot_b, n) for n in ("roc.csv", "roc.json", "spots.json")] + [(mesr_a, mesr_b, "mesr.json")]
    differ = [n for a, b, n in files if (a / n).read_bytes() != (b / n).read_bytes()]
    _report(capsys, 10, not differ, f"second runs of criteria 2 and 8 byte-identical; differing files={differ}")
