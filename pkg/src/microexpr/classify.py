"""Linear SVM trained by dual coordinate descent, cost search and subject-wise evaluation."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import StratifiedKFold
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

log = logging.getLogger(__name__)

COST_GRID = (0.1, 1.0, 2.0, 10.0, 100.0, 1000.0)


@njit(cache=True)
def _dual_cd(X, y, C, tol, max_epochs, history):
    """Hinge-loss dual coordinate descent. Bias is the last column of X.

    Returns ``(w, alpha, epochs)``; ``history[e]`` receives the dual
    objective after epoch ``e``.
    """
    n, d = X.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    qii = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += X[i, j] * X[i, j]
        qii[i] = s
    epochs = 0
    for epoch in range(max_epochs):
        max_step = 0.0
        for i in range(n):
            if qii[i] <= 0.0:
                continue
            wx = 0.0
            for j in range(d):
                wx += w[j] * X[i, j]
            g = y[i] * wx - 1.0
            a_old = alpha[i]
            a_new = a_old - g / qii[i]
            if a_new < 0.0:
                a_new = 0.0
            elif a_new > C:
                a_new = C
            step = a_new - a_old
            if step != 0.0:
                alpha[i] = a_new
                coef = step * y[i]
                for j in range(d):
                    w[j] += coef * X[i, j]
                if abs(step) > max_step:
                    max_step = abs(step)
        ww = 0.0
        for j in range(d):
            ww += w[j] * w[j]
        history[epoch] = alpha.sum() - 0.5 * ww
        epochs = epoch + 1
        if max_step < tol:
            break
    return w, alpha, epochs


def train_binary(X, y, C: float, tol: float = 1e-4, max_epochs: int = 1000):
    """Train one linear machine on labels in {-1, +1}.

    Returns ``(weights, bias, dual_objective_per_epoch)``.
    """
    Xa = np.hstack([np.asarray(X, dtype=np.float64), np.ones((len(X), 1))])
    hist = np.zeros(max_epochs)
    w, _, epochs = _dual_cd(np.ascontiguousarray(Xa), np.asarray(y, dtype=np.float64), float(C), tol, max_epochs, hist)
    return w[:-1].copy(), float(w[-1]), hist[:epochs].copy()


class LinearSVM(ClassifierMixin, BaseEstimator):
    """One-vs-one linear SVM.

    Parameters
    ----------
    C : float or "auto"
        Cost. ``"auto"`` picks it from :data:`COST_GRID` by stratified
        5-fold cross-validation on the training data.
    standardize : bool
        z-score features with training statistics before training.
    tol : float
        Stop when no dual variable moves more than this in an epoch.
    max_epochs : int
    """

    def __init__(self, C=1.0, standardize=True, tol=1e-4, max_epochs=1000):
        self.C = C
        self.standardize = standardize
        self.tol = tol
        self.max_epochs = max_epochs

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        classes = np.unique(y)
        if len(classes) < 2:
            raise ValueError(f"need at least two classes to train, got {classes.tolist()}")
        self.C_ = select_cost(X, y, standardize=self.standardize) if self.C == "auto" else float(self.C)
        self.classes_ = classes
        if self.standardize:
            self.mean_ = X.mean(axis=0)
            std = X.std(axis=0)
            self.scale_ = np.where(std > 0, std, 1.0)
        else:
            self.mean_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        Z = (X - self.mean_) / self.scale_
        self.pairs_ = list(combinations(range(len(classes)), 2))
        self.coef_ = np.zeros((len(self.pairs_), X.shape[1]))
        self.intercept_ = np.zeros(len(self.pairs_))
        self.dual_objective_ = []
        for m, (a, b) in enumerate(self.pairs_):
            sel = (y == classes[a]) | (y == classes[b])
            yy = np.where(y[sel] == classes[a], 1.0, -1.0)
            w, bias, hist = train_binary(Z[sel], yy, self.C_, self.tol, self.max_epochs)
            self.coef_[m] = w
            self.intercept_[m] = bias
            self.dual_objective_.append(hist)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        """Pairwise decision values, shape (n_samples, n_pairs); positive favours the first class."""
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return ((X - self.mean_) / self.scale_) @ self.coef_.T + self.intercept_

    def predict(self, X):
        dec = self.decision_function(X)
        k = len(self.classes_)
        votes = np.zeros((len(dec), k))
        strength = np.zeros((len(dec), k))
        for m, (a, b) in enumerate(self.pairs_):
            pos = dec[:, m] > 0
            votes[pos, a] += 1
            votes[~pos, b] += 1
            strength[:, a] += dec[:, m]
            strength[:, b] -= dec[:, m]
        out = np.empty(len(dec), dtype=np.intp)
        for i in range(len(dec)):
            best = np.flatnonzero(votes[i] == votes[i].max())
            if len(best) > 1:
                s = strength[i, best]
                best = best[s == s.max()]
            out[i] = best[0]
        return self.classes_[out]

    def to_json(self) -> str:
        check_is_fitted(self, "coef_")
        return json.dumps(
            {
                "classes": self.classes_.tolist(),
                "pairs": [list(p) for p in self.pairs_],
                "coef": self.coef_.tolist(),
                "intercept": self.intercept_.tolist(),
                "mean": self.mean_.tolist(),
                "scale": self.scale_.tolist(),
                "C": self.C_,
                "standardize": self.standardize,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "LinearSVM":
        d = json.loads(text)
        model = cls(C=d["C"], standardize=d["standardize"])
        model.C_ = d["C"]
        model.classes_ = np.asarray(d["classes"])
        model.pairs_ = [tuple(p) for p in d["pairs"]]
        model.coef_ = np.asarray(d["coef"], dtype=np.float64)
        model.intercept_ = np.asarray(d["intercept"], dtype=np.float64)
        model.mean_ = np.asarray(d["mean"], dtype=np.float64)
        model.scale_ = np.asarray(d["scale"], dtype=np.float64)
        model.n_features_in_ = model.coef_.shape[1]
        return model


def select_cost(X, y, grid=COST_GRID, n_folds: int = 5, standardize: bool = True) -> float:
    """Cost with the best mean stratified k-fold accuracy; the smallest wins ties.

    Folds whose training part lacks a class are skipped with a warning.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if len(y) < n_folds:
        raise ValueError(f"cost selection needs at least {n_folds} samples, got {len(y)}")
    classes = np.unique(y)
    with warnings.catch_warnings():
        # StratifiedKFold warns when a class has fewer members than folds
        warnings.simplefilter("ignore", UserWarning)
        folds = list(StratifiedKFold(n_splits=n_folds).split(X, y))
    usable = []
    for k, (tr, te) in enumerate(folds):
        if len(np.unique(y[tr])) < len(classes):
            warnings.warn(f"skipping fold {k}: a class is absent from its training part")
            continue
        usable.append((tr, te))
    if not usable:
        warnings.warn("no usable cross-validation fold; falling back to the smallest cost")
        return float(grid[0])
    best_c, best_acc = float(grid[0]), -1.0
    for c in sorted(grid):
        accs = []
        for tr, te in usable:
            model = LinearSVM(C=c, standardize=standardize).fit(X[tr], y[tr])
            accs.append(np.mean(model.predict(X[te]) == y[te]))
        acc = float(np.mean(accs))
        if acc > best_acc:
            best_c, best_acc = float(c), acc
    return best_c


@dataclass
class EvaluationReport:
    accuracy: float
    labels: list
    confusion: np.ndarray  # rows: truth, columns: prediction
    per_group: dict
    predictions: dict = field(default_factory=dict)  # sample index -> predicted label
    costs: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "labels": [str(v) for v in self.labels],
            "confusion": self.confusion.tolist(),
            "per_group": {str(k): v for k, v in sorted(self.per_group.items())},
            "costs": {str(k): v for k, v in sorted(self.costs.items())},
        }


def loso_evaluate(X, y, groups, C="auto", standardize=True, mode="subject") -> EvaluationReport:
    """Leave-one-subject-out (or leave-one-sample-out with ``mode="sample"``) evaluation.

    Held-out samples whose class never occurs in training count as errors.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    groups = np.asarray(groups)
    if mode == "sample":
        groups = np.arange(len(y))
    elif mode != "subject":
        raise ValueError(f"mode must be 'subject' or 'sample', got {mode!r}")
    uniq = sorted(set(groups.tolist()), key=str)
    if len(uniq) < 2:
        raise ValueError("leave-one-out evaluation needs at least two groups")
    labels = sorted(set(y.tolist()), key=str)
    index = {lab: i for i, lab in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=int)
    per_group, preds, costs, models = {}, {}, {}, {}
    for g in uniq:
        test = groups == g
        train = ~test
        train_classes = set(y[train].tolist())
        unseen = set(y[test].tolist()) - train_classes
        if unseen:
            warnings.warn(f"group {g}: classes {sorted(unseen, key=str)} unseen in training count as errors")
        if len(train_classes) < 2:
            pred = np.full(test.sum(), next(iter(train_classes)), dtype=y.dtype)
        else:
            c = C
            if C == "auto":
                c = select_cost(X[train], y[train], standardize=standardize) if train.sum() >= 5 else COST_GRID[0]
            model = LinearSVM(C=c, standardize=standardize).fit(X[train], y[train])
            costs[g] = float(model.C_)
            models[g] = model
            pred = model.predict(X[test])
        for i, p, t in zip(np.flatnonzero(test), pred, y[test]):
            preds[int(i)] = p
            confusion[index[t], index[p]] += 1
        per_group[g] = {"n": int(test.sum()), "correct": int(np.sum(pred == y[test]))}
    acc = float(np.trace(confusion) / confusion.sum())
    return EvaluationReport(acc, labels, confusion, per_group, preds, costs, models)
