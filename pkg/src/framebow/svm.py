"""Linear SVM training and probability-calibrated one-vs-one classification.

The binary trainer is dual coordinate descent on the L1 soft-margin
objective with the bias folded into an appended constant feature; it stops
when the relative duality gap drops below 1e-3 or at the epoch cap.  Decision
values are calibrated with a Platt sigmoid P = 1/(1 + exp(a*f + b)) fitted by
Newton iterations with backtracking line search on prior-corrected targets.
Multiclass probabilities combine the pairwise sigmoids by iterative pairwise
coupling.  The penalty C is selected by stratified 5-fold cross validation
over a power-of-two grid, ties resolved toward stronger regularization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

DUALITY_GAP_TOL = 1e-3
MAX_EPOCHS = 10000
PLATT_TOL = 1e-10
PLATT_MAX_ITER = 100
COUPLING_TOL = 1e-10
COUPLING_MAX_ITER = 1000
DEFAULT_C_GRID = tuple(2.0 ** e for e in range(-5, 6, 2))
MODEL_FORMAT = "framebow-svm"
MODEL_VERSION = 1


@dataclass(frozen=True)
class BinarySvm:
    """Hyperplane plus sigmoid calibration for one class pair.

    decision(x) > 0 favors `pos`; P(pos | f) = 1/(1 + exp(a*f + b)).
    """

    pos: str
    neg: str
    weights: np.ndarray
    bias: float
    platt_a: float
    platt_b: float
    platt_degenerate: bool = False

    def decision(self, x: np.ndarray) -> float:
        return float(self.weights @ x + self.bias)

    def prob_pos(self, x: np.ndarray) -> float:
        return sigmoid_calibrated(self.decision(x), self.platt_a, self.platt_b)


@dataclass(frozen=True)
class ClassProbabilities:
    classes: tuple[str, ...]
    probabilities: np.ndarray
    label: str


@dataclass(frozen=True)
class CvReport:
    chosen_c: float
    table: tuple[tuple[float, float], ...]  # (C, mean accuracy) rows


@dataclass(frozen=True)
class SvmModel:
    mode: str  # "two" | "three"
    classes: tuple[str, ...]
    feature_length: int
    svms: tuple[BinarySvm, ...]  # one per unordered pair, (i, j) with i < j
    penalty_c: float
    cv_table: tuple[tuple[float, float], ...]
    vocab_fingerprint: str = ""
    scaler_fingerprint: str = ""

    def __post_init__(self):
        n = len(self.classes)
        if len(self.svms) != n * (n - 1) // 2:
            raise ValueError("model must hold one binary SVM per class pair")


def sigmoid_calibrated(decision: float, a: float, b: float) -> float:
    """P = 1/(1 + exp(a*f + b)), computed stably."""
    z = a * decision + b
    if z >= 0:
        e = np.exp(-z)
        return float(e / (1.0 + e))
    return float(1.0 / (1.0 + np.exp(z)))


def train_binary(
    features: np.ndarray,
    labels: np.ndarray,
    penalty_c: float,
    seed: int = 0,
    max_epochs: int = MAX_EPOCHS,
    gap_tolerance: float = DUALITY_GAP_TOL,
) -> tuple[np.ndarray, float]:
    """Soft-margin linear SVM by dual coordinate descent.

    `labels` must be +/-1 with both classes present.  Returns (weights, bias).
    Deterministic for a fixed seed: sample order is reshuffled per epoch from
    a seeded generator.  Terminates when the duality gap falls below
    `gap_tolerance` relative to the primal objective, or at the epoch cap.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if set(np.unique(labels)) != {-1.0, 1.0}:
        raise ValueError("training set must contain both classes (+1/-1 labels)")

    n = len(features)
    xa = np.hstack([features, np.ones((n, 1))])
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    alpha = np.zeros(n)
    w = np.zeros(xa.shape[1])
    qii = (xa * xa).sum(axis=1)

    for _epoch in range(max_epochs):
        for i in rng.permutation(n):
            g = labels[i] * (w @ xa[i]) - 1.0
            a_old = alpha[i]
            a_new = min(max(a_old - g / qii[i], 0.0), penalty_c)
            if a_new != a_old:
                w += (a_new - a_old) * labels[i] * xa[i]
                alpha[i] = a_new
        margins = 1.0 - labels * (xa @ w)
        primal = 0.5 * w @ w + penalty_c * np.maximum(margins, 0.0).sum()
        dual = alpha.sum() - 0.5 * w @ w
        if primal - dual <= gap_tolerance * max(1.0, abs(primal)):
            break
    return w[:-1].copy(), float(w[-1])


def _platt_objective(a: float, b: float, decisions: np.ndarray, targets: np.ndarray) -> float:
    z = a * decisions + b
    log1pe = np.where(z > 0, z + np.log1p(np.exp(-z)), np.log1p(np.exp(z)))
    return float(np.sum(log1pe - (1.0 - targets) * z))


def fit_platt(decisions: np.ndarray, labels: np.ndarray) -> tuple[float, float, bool]:
    """Fit the calibration sigmoid; returns (a, b, degenerate).

    Newton with backtracking on the prior-corrected negative log-likelihood.
    If every decision value is identical there is nothing to fit: returns
    a=0 and b set so the constant output is the positive-class frequency.
    """
    decisions = np.asarray(decisions, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels > 0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("calibration needs both classes among the labels")
    if np.all(decisions == decisions[0]):
        return 0.0, float(np.log(n_neg / n_pos)), True

    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(pos, hi, lo)
    sigma = 1e-12
    a, b = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    fval = _platt_objective(a, b, decisions, t)

    for _ in range(PLATT_MAX_ITER):
        z = a * decisions + b
        p = np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))
        pq = p * (1.0 - p)
        h11 = float(decisions @ (decisions * pq)) + sigma
        h22 = float(pq.sum()) + sigma
        h21 = float(decisions @ pq)
        d1 = t - p
        g1 = float(decisions @ d1)
        g2 = float(d1.sum())
        if max(abs(g1), abs(g2)) < PLATT_TOL:
            break
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db
        step = 1.0
        while step >= 1e-10:
            na, nb = a + step * da, b + step * db
            nf = _platt_objective(na, nb, decisions, t)
            if nf < fval + 1e-4 * step * gd:
                a, b, fval = na, nb, nf
                break
            step /= 2.0
        else:
            break  # line search cannot improve further
    return a, b, False


def couple_pairwise(r: np.ndarray) -> np.ndarray:
    """Multiclass probabilities from a pairwise matrix r[i, j] = P(i | i vs j).

    Iterative fixed-point minimization of sum_{i<j} (r_ji p_i - r_ij p_j)^2
    over the probability simplex.
    """
    k = r.shape[0]
    q = np.zeros((k, k))
    for t in range(k):
        for j in range(k):
            if j == t:
                q[t, t] = sum(r[s, t] ** 2 for s in range(k) if s != t)
            else:
                q[t, j] = -r[j, t] * r[t, j]
    p = np.full(k, 1.0 / k)
    qp = q @ p
    pqp = float(p @ qp)
    for _ in range(COUPLING_MAX_ITER):
        if np.abs(qp - pqp).max() < COUPLING_TOL:
            break
        for t in range(k):
            diff = (-qp[t] + pqp) / q[t, t]
            p[t] += diff
            pqp = (pqp + diff * (diff * q[t, t] + 2.0 * qp[t])) / (1.0 + diff) ** 2
            qp = (qp + diff * q[:, t]) / (1.0 + diff)
            p /= 1.0 + diff
    return p / p.sum()


def _pair_index(classes: tuple[str, ...]) -> list[tuple[int, int]]:
    n = len(classes)
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _train_pairs(
    features: np.ndarray,
    labels: np.ndarray,
    classes: tuple[str, ...],
    penalty_c: float,
    seed: int,
) -> list[BinarySvm]:
    svms = []
    for pair_no, (i, j) in enumerate(_pair_index(classes)):
        mask = (labels == i) | (labels == j)
        x = features[mask]
        y = np.where(labels[mask] == i, 1.0, -1.0)
        w, b = train_binary(x, y, penalty_c, seed=seed * 1009 + pair_no)
        decisions = x @ w + b
        a, pb, degenerate = fit_platt(decisions, y)
        svms.append(BinarySvm(
            pos=classes[i], neg=classes[j], weights=w, bias=b,
            platt_a=a, platt_b=pb, platt_degenerate=degenerate,
        ))
    return svms


def predict_proba(model: SvmModel, x: np.ndarray) -> ClassProbabilities:
    """Calibrated class probabilities for one feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.feature_length,):
        raise ValueError(
            f"feature vector has length {x.shape[0] if x.ndim == 1 else x.shape}, "
            f"model expects {model.feature_length}"
        )
    k = len(model.classes)
    if k == 2:
        p0 = model.svms[0].prob_pos(x)
        probs = np.array([p0, 1.0 - p0])
    else:
        r = np.full((k, k), 0.5)
        index = {c: i for i, c in enumerate(model.classes)}
        for svm in model.svms:
            i, j = index[svm.pos], index[svm.neg]
            pij = svm.prob_pos(x)
            r[i, j] = pij
            r[j, i] = 1.0 - pij
        probs = couple_pairwise(r)
    label = model.classes[int(np.argmax(probs))]
    return ClassProbabilities(classes=model.classes, probabilities=probs, label=label)


def stratified_folds(labels: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Fold assignment per sample; per-class fold sizes differ by at most 1."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, n_folds])))
    fold = np.empty(len(labels), dtype=np.int64)
    for cls in np.unique(labels):
        rows = np.flatnonzero(labels == cls)
        rows = rng.permutation(rows)
        fold[rows] = np.arange(len(rows)) % n_folds
    return fold


def cross_validate(
    features: np.ndarray,
    labels: np.ndarray,
    classes: tuple[str, ...],
    c_grid: tuple[float, ...] = DEFAULT_C_GRID,
    seed: int = 0,
    n_folds: int = 5,
) -> CvReport:
    """Pick the penalty by stratified k-fold accuracy; ties -> smallest C."""
    labels = np.asarray(labels)
    offending = [
        f"{cls!r} ({int((labels == idx).sum())})"
        for idx, cls in enumerate(classes)
        if int((labels == idx).sum()) < n_folds
    ]
    if offending:
        raise ValueError(
            f"classes with fewer than {n_folds} samples: {', '.join(offending)}"
        )
    fold = stratified_folds(labels, n_folds, seed)
    table = []
    for c in sorted(c_grid):
        correct = 0
        for f in range(n_folds):
            train, test = fold != f, fold == f
            svms = _train_pairs(features[train], labels[train], classes, c, seed=seed + 7 * f)
            model = SvmModel(
                mode="two" if len(classes) == 2 else "three",
                classes=classes, feature_length=features.shape[1],
                svms=tuple(svms), penalty_c=c, cv_table=(),
            )
            for row in np.flatnonzero(test):
                pred = predict_proba(model, features[row])
                correct += int(pred.label == classes[labels[row]])
        table.append((c, correct / len(labels)))
    best_acc = max(acc for _, acc in table)
    chosen = min(c for c, acc in table if acc == best_acc)
    return CvReport(chosen_c=chosen, table=tuple(table))


def train_model(
    features: np.ndarray,
    labels: np.ndarray,
    classes: tuple[str, ...],
    seed: int = 0,
    c_grid: tuple[float, ...] = DEFAULT_C_GRID,
    vocab_fingerprint: str = "",
    scaler_fingerprint: str = "",
) -> SvmModel:
    """Cross-validate the penalty, then train the final one-vs-one model."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    report = cross_validate(features, labels, classes, c_grid, seed)
    svms = _train_pairs(features, labels, classes, report.chosen_c, seed)
    return SvmModel(
        mode="two" if len(classes) == 2 else "three",
        classes=tuple(classes),
        feature_length=features.shape[1],
        svms=tuple(svms),
        penalty_c=report.chosen_c,
        cv_table=report.table,
        vocab_fingerprint=vocab_fingerprint,
        scaler_fingerprint=scaler_fingerprint,
    )


def save_model(path: str | Path, model: SvmModel) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "mode": model.mode,
        "classes": list(model.classes),
        "feature_length": model.feature_length,
        "penalty_c": model.penalty_c,
        "cv_table": [[c, acc] for c, acc in model.cv_table],
        "vocab_fingerprint": model.vocab_fingerprint,
        "scaler_fingerprint": model.scaler_fingerprint,
        "pairs": [
            {
                "pos": s.pos,
                "neg": s.neg,
                "weights": [float(v) for v in s.weights],
                "bias": s.bias,
                "platt_a": s.platt_a,
                "platt_b": s.platt_b,
                "platt_degenerate": s.platt_degenerate,
            }
            for s in model.svms
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path: str | Path) -> SvmModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid model JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {doc.get('version')}")
    feature_length = int(doc["feature_length"])
    svms = []
    for pair in doc["pairs"]:
        w = np.array(pair["weights"], dtype=np.float64)
        if w.shape[0] != feature_length:
            raise FormatError(
                f"{path}: pair {pair['pos']}/{pair['neg']} has {w.shape[0]} weights, "
                f"header says {feature_length}"
            )
        svms.append(BinarySvm(
            pos=pair["pos"], neg=pair["neg"], weights=w, bias=float(pair["bias"]),
            platt_a=float(pair["platt_a"]), platt_b=float(pair["platt_b"]),
            platt_degenerate=bool(pair["platt_degenerate"]),
        ))
    return SvmModel(
        mode=doc["mode"],
        classes=tuple(doc["classes"]),
        feature_length=feature_length,
        svms=tuple(svms),
        penalty_c=float(doc["penalty_c"]),
        cv_table=tuple((float(c), float(a)) for c, a in doc["cv_table"]),
        vocab_fingerprint=doc["vocab_fingerprint"],
        scaler_fingerprint=doc["scaler_fingerprint"],
    )
