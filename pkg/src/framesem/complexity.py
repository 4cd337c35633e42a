"""Document-level complexity factors and performance regression.

Per-document features (trigger depth, trigger POS, POS/DEP distributions,
...) are related to per-document F-measure through Pearson correlation and
a linear model fitted by greedy forward selection under k-fold CV MSE.
F-measures are in percentage points throughout this module.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._ttable import NORMAL_CRITICAL_05, T_CRITICAL_05
from .corpus import Document
from .evaluator import EvalUnit, evaluate, is_root_trigger, is_verbal_trigger

log = logging.getLogger(__name__)

RIDGE = 1e-8
MWE_DEPRELS = frozenset({"fixed", "flat"})
MANDATORY_FEATURES = ("pct_root_trigger", "pct_verbal_trigger", "mean_sentence_length",
                      "mean_trigger_depth", "mean_trigger_position", "mwe_share")


class ComplexityError(ValueError):
    pass


# -- features ------------------------------------------------------------------


def document_features(doc: Document) -> dict[str, float]:
    """Features over the sentences holding at least one trigger.

    Depth and position are read at each trigger's first token; root and
    verbal status at its highest token.
    """
    measured = [s for s in doc.sentences if doc.annotations.get(s.id)]
    if not measured:
        raise ComplexityError(f"document {doc.id!r} has no triggers")
    roots = verbal = 0
    depths, positions = [], []
    for sent in measured:
        for inst in doc.annotations[sent.id]:
            first = inst.trigger[0]
            roots += is_root_trigger(sent, inst.trigger)
            verbal += is_verbal_trigger(sent, inst.trigger)
            depths.append(sent.depth(first))
            positions.append(first)
    n_trig = len(depths)
    tokens = [tok for s in measured for tok in s.tokens]
    n_tok = len(tokens)
    pos = {}
    dep = {}
    for tok in tokens:
        pos[tok.upos] = pos.get(tok.upos, 0) + 1
        dep[tok.deprel] = dep.get(tok.deprel, 0) + 1
    feats = {
        "pct_root_trigger": roots / n_trig,
        "pct_verbal_trigger": verbal / n_trig,
        "mean_sentence_length": n_tok / len(measured),
        "mean_trigger_depth": float(np.mean(depths)),
        "mean_trigger_position": float(np.mean(positions)),
        "mwe_share": sum(1 for t in tokens if t.deprel in MWE_DEPRELS) / n_tok,
    }
    for tag in sorted(pos):
        feats[f"pos_{tag}"] = pos[tag] / n_tok
    for rel in sorted(dep):
        feats[f"dep_{rel}"] = dep[rel] / n_tok
    return feats


def document_fmeasure(units: Sequence[EvalUnit], metric: str = "soft") -> float:
    """F-measure (ratio) restricted to one document's evaluation units."""
    return evaluate(units, metric).f_measure


@dataclass(frozen=True)
class DocumentRecord:
    doc_id: str
    n_triggers: int
    features: Mapping[str, float]
    f: float  # percentage points


def document_records(docs: Iterable[Document], units: Iterable[EvalUnit], metric: str = "soft") -> list[DocumentRecord]:
    by_doc: dict[str, list[EvalUnit]] = {}
    for u in units:
        by_doc.setdefault(u.doc, []).append(u)
    out = []
    for doc in docs:
        if doc.n_triggers == 0:
            continue
        f = 100.0 * document_fmeasure(by_doc.get(doc.id, []), metric)
        out.append(DocumentRecord(doc.id, doc.n_triggers, document_features(doc), f))
    return out


def filter_documents(records: Iterable[DocumentRecord], min_triggers: int = 30) -> list[DocumentRecord]:
    return [r for r in records if r.n_triggers >= min_triggers]


def feature_matrix(records: Sequence[DocumentRecord]) -> tuple[list[str], np.ndarray]:
    """Stack feature dicts; features absent from a document count as 0."""
    extra = sorted({k for r in records for k in r.features} - set(MANDATORY_FEATURES))
    names = list(MANDATORY_FEATURES) + extra
    X = np.array([[r.features.get(k, 0.0) for k in names] for r in records], dtype=np.float64).reshape(len(records), len(names))
    return names, X


# -- statistics ----------------------------------------------------------------


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ComplexityError("pearson needs two vectors of equal length")
    if len(x) < 3:
        raise ComplexityError("pearson needs at least 3 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ComplexityError("correlation undefined for a constant vector")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def t_critical(df: int) -> float:
    if df < 1:
        raise ComplexityError("t-test needs at least 1 degree of freedom")
    return T_CRITICAL_05[df - 1] if df <= len(T_CRITICAL_05) else NORMAL_CRITICAL_05


def t_test(r: float, n: int) -> tuple[float, bool]:
    """Student's t for a correlation coefficient, two-tailed at alpha = 0.05."""
    if n < 3:
        raise ComplexityError("t-test needs n >= 3")
    if abs(r) >= 1.0:
        return math.copysign(math.inf, r), True
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return t, abs(t) > t_critical(n - 2)


@dataclass(frozen=True)
class RankedFeature:
    feature: str
    r: float
    t: float
    significant: bool


def rank_features(X: np.ndarray, y: Sequence[float], names: Sequence[str]) -> list[RankedFeature]:
    """Features sorted by decreasing |r| with the F-measure (ties by name)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rows = []
    skipped = []
    for j, name in enumerate(names):
        col = X[:, j]
        if np.all(col == col[0]):
            skipped.append(name)
            continue
        r = pearson(col, y)
        t, sig = t_test(r, len(y))
        rows.append(RankedFeature(name, r, t, sig))
    if skipped:
        log.warning("constant features excluded from the ranking: %s", ", ".join(skipped))
    rows.sort(key=lambda row: (-abs(row.r), row.feature))
    return rows


def fit_ols(X: np.ndarray, y: Sequence[float], ridge: float = RIDGE, names: Sequence[str] | None = None):
    """Least squares with intercept via damped normal equations; returns ``(weights, intercept)``.

    The damping term applies to the feature block only.
    """
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64).reshape(len(y), -1)
    n, p = X.shape
    if n < p + 1:
        raise ComplexityError(f"{n} rows cannot fit {p} features plus an intercept")
    if p == 0:
        return np.zeros(0), float(np.mean(y))
    Z = np.hstack([np.ones((n, 1)), X])
    A = Z.T @ Z
    A[1:, 1:] += ridge * np.eye(p)
    try:
        sol = np.linalg.solve(A, Z.T @ y)
        singular = not np.all(np.isfinite(sol)) or np.linalg.cond(A) > 1e15
    except np.linalg.LinAlgError:
        singular = True
    if singular:
        _, s, vt = np.linalg.svd(X - X.mean(axis=0), full_matrices=False)
        null = vt[-1]
        labels = list(names) if names is not None else [f"x{j}" for j in range(p)]
        involved = [labels[j] for j in np.flatnonzero(np.abs(null) > 1e-3)]
        raise ComplexityError(f"singular regression system; collinear features: {involved}")
    return sol[1:], float(sol[0])


def _folds(n, k, seed):
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


def kfold_mse(X: np.ndarray, y: Sequence[float], subset: Sequence[int], k: int = 5, seed: int = 0) -> float:
    """Mean over folds of held-out MSE for OLS on standardized ``subset`` columns."""
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64).reshape(len(y), -1)
    if k < 2:
        raise ComplexityError("k must be at least 2")
    if len(y) < 2 * k:
        raise ComplexityError(f"{len(y)} points are too few for {k}-fold CV")
    cols = sorted(set(int(j) for j in subset))
    mses = []
    for test in _folds(len(y), k, seed):
        train = np.setdiff1d(np.arange(len(y)), test)
        Xtr, Xte = X[np.ix_(train, cols)], X[np.ix_(test, cols)]
        mu = Xtr.mean(axis=0)
        sd = Xtr.std(axis=0)
        keep = sd > 0
        if not keep.all():
            log.info("fold drops constant feature(s) %s", [cols[j] for j in np.flatnonzero(~keep)])
        Ztr = (Xtr[:, keep] - mu[keep]) / sd[keep]
        Zte = (Xte[:, keep] - mu[keep]) / sd[keep]
        w, b = fit_ols(Ztr, y[train])
        resid = y[test] - (Zte @ w + b)
        mses.append(float(np.mean(resid ** 2)))
    return float(np.mean(mses))


def max_cv_features(n: int, k: int) -> int:
    """Largest subset every training fold of :func:`kfold_mse` can fit with an intercept."""
    smallest_train = n - -(-n // k)
    return max(0, smallest_train - 1)


@dataclass
class RegressionModel:
    features: list[str]
    columns: list[int]
    weights: np.ndarray
    intercept: float
    mse_trace: list[float]
    means: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stds: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if not self.columns:
            return np.full(X.shape[0], self.intercept)
        Z = (X[:, self.columns] - self.means) / self.stds
        return Z @ self.weights + self.intercept


def incremental_selection(X: np.ndarray, y: Sequence[float], k: int = 5, seed: int = 0,
                          names: Sequence[str] | None = None, tol: float = 1e-9) -> RegressionModel:
    """Greedy forward selection minimizing k-fold CV MSE.

    Stops once the best candidate improves the current CV MSE by no more
    than ``tol``, or when another feature would not fit the smallest
    training fold; the chosen set is then refit on all rows.
    """
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64).reshape(len(y), -1)
    p = X.shape[1]
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    selected: list[int] = []
    current = kfold_mse(X, y, [], k, seed)
    trace = [current]
    remaining = list(range(p))
    cap = max_cv_features(len(y), k)
    while remaining and len(selected) < cap:
        best_mse, best_j = min((kfold_mse(X, y, selected + [j], k, seed), j) for j in remaining)
        if current - best_mse <= tol:
            break
        selected.append(best_j)
        remaining.remove(best_j)
        current = best_mse
        trace.append(current)
        log.info("selected %s (cv mse %.6g)", names[best_j], current)
    if selected:
        mu = X[:, selected].mean(axis=0)
        sd = X[:, selected].std(axis=0)
        w, b = fit_ols((X[:, selected] - mu) / sd, y, names=[names[j] for j in selected])
    else:
        mu, sd = np.zeros(0), np.zeros(0)
        w, b = np.zeros(0), float(np.mean(y))
    return RegressionModel([names[j] for j in selected], selected, w, b, trace, mu, sd)


def greedy_oracle(X, y, k=5, seed=0, tol=1e-9):
    """Forward selection by enumerating every subset of the next size.

    Slow reference for :func:`incremental_selection`: at step s it scores all
    size-s subsets, keeps those extending the previous choice, and picks the
    minimum (lowest new index on ties).
    """
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(X).shape[1]
    chosen: tuple[int, ...] = ()
    trace = [kfold_mse(X, y, [], k, seed)]
    for size in range(1, min(p, max_cv_features(len(y), k)) + 1):
        scored = []
        for subset in combinations(range(p), size):
            if set(chosen) <= set(subset):
                new = (set(subset) - set(chosen)).pop()
                scored.append((kfold_mse(X, y, list(subset), k, seed), new))
        mse, new = min(scored)
        if trace[-1] - mse <= tol:
            break
        chosen = chosen + (new,)
        trace.append(mse)
    return list(chosen), trace


def naive_baseline_mse(y_train: Sequence[float], y_test: Sequence[float]) -> float:
    y_train = np.asarray(y_train, dtype=np.float64)
    if y_train.size == 0:
        raise ComplexityError("empty training targets")
    y_test = np.asarray(y_test, dtype=np.float64)
    return float(np.mean((y_test - y_train.mean()) ** 2))


def r_squared(y: Sequence[float], yhat: Sequence[float]) -> float:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ComplexityError("R^2 undefined for constant targets")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def performance_stats(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ComplexityError("need at least 2 documents")
    return float(v.mean()), float(v.std(ddof=1))


# -- study ---------------------------------------------------------------------


@dataclass
class AnalysisResult:
    n_documents: int
    n_kept: int
    mean_f: float
    std_f: float
    ranking: list[RankedFeature]
    model: RegressionModel
    scatter: list[tuple[str, float, float]]
    baseline_mse: float
    model_mse: float
    r2: float

    @property
    def relative_reduction(self) -> float:
        return 1.0 - self.model_mse / self.baseline_mse if self.baseline_mse > 0 else 0.0


def analyze(records: Sequence[DocumentRecord], k: int = 5, seed: int = 0, min_triggers: int = 30) -> AnalysisResult:
    kept = filter_documents(records, min_triggers)
    if len(kept) < 2:
        raise ComplexityError(f"only {len(kept)} document(s) with >= {min_triggers} triggers")
    names, X = feature_matrix(kept)
    y = np.array([r.f for r in kept])
    mean_f, std_f = performance_stats(y)
    ranking = rank_features(X, y, names)
    k = max(2, min(k, len(y) // 2))
    if len(y) < 2 * k:
        raise ComplexityError(f"{len(y)} documents are too few for cross-validation")
    model = incremental_selection(X, y, k, seed, names)
    yhat = model.predict(X)
    r2 = r_squared(y, yhat) if np.ptp(y) > 0 else 0.0
    scatter = [(r.doc_id, float(t), float(p)) for r, t, p in zip(kept, y, yhat)]
    return AnalysisResult(len(records), len(kept), mean_f, std_f, ranking, model, scatter,
                          model.mse_trace[0], model.mse_trace[-1], r2)


def write_ranking(stream, ranking: Iterable[RankedFeature]):
    w = csv.writer(stream, delimiter="\t", lineterminator="\n")
    w.writerow(["feature", "r", "t", "significant"])
    for row in ranking:
        w.writerow([row.feature, f"{row.r:.6f}", f"{row.t:.6f}", "yes" if row.significant else "no"])


def write_trace(stream, model: RegressionModel):
    w = csv.writer(stream, delimiter="\t", lineterminator="\n")
    w.writerow(["step", "feature", "cv_mse"])
    w.writerow([0, "(mean)", f"{model.mse_trace[0]:.6f}"])
    for step, (name, mse) in enumerate(zip(model.features, model.mse_trace[1:]), start=1):
        w.writerow([step, name, f"{mse:.6f}"])


def write_scatter(stream, scatter):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["doc_id", "f_true", "f_pred"])
    for doc_id, t, p in scatter:
        w.writerow([doc_id, f"{t:.6f}", f"{p:.6f}"])
