"""Imbalance-aware evaluation: confusion metrics, sensitivity-PPV curves,
a features-only baseline ranking, and the cross-validation harness.

Accuracy is useless at a 1-in-201 prevalence, so everything here reports
positive predictive value, sensitivity, F1 and Matthews correlation, plus
the area under the sensitivity-PPV curve.  Degenerate 0/0 cells are 0 by
convention throughout.
"""

from __future__ import annotations

import json
import warnings
from collections.abc import Mapping
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import expit

from .cohort import Cohort, split_by_physician_mask
from .errors import DomainError, ParameterError
from .graph_engine import (
    DEFAULT_DAMPING,
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    build,
    run_inference,
)
from .learning import (
    DEFAULT_PRIOR_ETA,
    DEFAULT_SMOOTHING,
    ModelParams,
    fit,
    physician_log_likelihoods,
)

DEFAULT_SENSITIVITY_GRID = (0.20, 0.25, 0.30, 0.35, 0.40, 0.45)

CURVE_COLUMNS = ["threshold", "sensitivity", "ppv", "f1", "mcc"]


# --------------------------------------------------------------------------
# Confusion counts and point metrics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative")

    @property
    def population(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricValues:
    ppv: float
    sensitivity: float
    f1: float
    mcc: float


def _align(scores, labels):
    """Common (scores, labels) array view for mapping or array-like inputs."""
    if isinstance(scores, Mapping) or isinstance(labels, Mapping):
        if not (isinstance(scores, Mapping) and isinstance(labels, Mapping)):
            raise ParameterError("scores and labels must both be mappings or both arrays")
        if set(scores) != set(labels):
            raise ParameterError("scores and labels must cover the same entities")
        keys = sorted(scores)
        s = np.array([scores[k] for k in keys], dtype=np.float64)
        y = np.array([labels[k] for k in keys])
    else:
        s = np.asarray(scores, dtype=np.float64)
        y = np.asarray(labels)
        if s.shape != y.shape or s.ndim != 1:
            raise ParameterError(
                f"scores and labels must be equal-length 1-d arrays, got "
                f"{s.shape} and {y.shape}"
            )
    if s.size == 0:
        raise ParameterError("cannot evaluate an empty score set")
    if np.isnan(s).any() or s.min() < 0.0 or s.max() > 1.0:
        raise DomainError("scores must lie in [0, 1]")
    if not np.isin(y, (0, 1)).all():
        raise DomainError("labels must be 0 or 1")
    return s, y.astype(np.int64)


def confusion_at(scores, labels, threshold: float) -> ConfusionCounts:
    """Counts under the rule: predict positive iff score >= threshold."""
    s, y = _align(scores, labels)
    pred = s >= threshold
    return ConfusionCounts(
        tp=int(np.sum(pred & (y == 1))),
        fp=int(np.sum(pred & (y == 0))),
        tn=int(np.sum(~pred & (y == 0))),
        fn=int(np.sum(~pred & (y == 1))),
    )


def metrics(counts: ConfusionCounts) -> MetricValues:
    """Standard definitions; any 0/0 is 0 by convention.

    ppv = tp/(tp+fp), sensitivity = tp/(tp+fn),
    f1 = 2*ppv*sens/(ppv+sens),
    mcc = (tp*tn - fp*fn) / sqrt((tp+fp)(tp+fn)(tn+fp)(tn+fn)).
    """
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    ppv = tp / (tp + fp) if tp + fp else 0.0
    sens = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2.0 * ppv * sens / (ppv + sens) if ppv + sens else 0.0
    denom = float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (float(tp) * tn - float(fp) * fn) / np.sqrt(denom) if denom else 0.0
    return MetricValues(ppv=ppv, sensitivity=sens, f1=float(f1), mcc=float(mcc))


# --------------------------------------------------------------------------
# Sensitivity-PPV curve and AUC
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    sensitivity: float
    ppv: float
    f1: float
    mcc: float


@dataclass(frozen=True)
class GridRow:
    """Curve metrics interpolated at one target sensitivity."""

    target_sensitivity: float
    ppv: float
    f1: float
    mcc: float


@dataclass(frozen=True)
class MetricsReport:
    curve: tuple
    auc: float
    grid: tuple
    num_positive: int
    num_negative: int

    def to_json_dict(self) -> dict:
        return {
            "auc": self.auc,
            "num_positive": self.num_positive,
            "num_negative": self.num_negative,
            "curve": [asdict(p) for p in self.curve],
            "sensitivity_grid": [asdict(r) for r in self.grid],
        }


def curve_and_auc(scores, labels, sensitivity_grid=DEFAULT_SENSITIVITY_GRID) -> MetricsReport:
    """One curve point per distinct score value, descending.

    Ties share the point evaluated at their common value.  AUC is the
    trapezoid rule over consecutive (sensitivity, ppv) points, anchored at
    (sensitivity 0, ppv 1) — the usual precision-recall endpoint, and the
    only choice under which a classifier that is perfect at every threshold
    scores exactly 1.  Grid rows interpolate linearly in sensitivity along
    the curve's best-ppv envelope; targets outside the achieved sensitivity
    range take the nearest endpoint's values.
    """
    s, y = _align(scores, labels)
    num_pos = int(y.sum())
    num_neg = int(y.size - num_pos)
    if num_pos == 0 or num_neg == 0:
        raise DomainError("curve requires at least one positive and one negative label")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # index of the last entry of each run of equal scores
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    thresholds = s_sorted[ends]
    tp = np.cumsum(y_sorted)[ends].astype(np.float64)
    predicted = (ends + 1).astype(np.float64)
    fp = predicted - tp
    fn = num_pos - tp
    tn = num_neg - fp

    sens = tp / num_pos
    ppv = tp / predicted
    with np.errstate(invalid="ignore", divide="ignore"):
        f1 = np.where(ppv + sens > 0, 2.0 * ppv * sens / (ppv + sens), 0.0)
        denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
        mcc = np.where(denom > 0, (tp * tn - fp * fn) / np.sqrt(denom), 0.0)

    sens_ext = np.r_[0.0, sens]
    ppv_ext = np.r_[1.0, ppv]
    auc = float(np.sum(np.diff(sens_ext) * (ppv_ext[1:] + ppv_ext[:-1]) * 0.5))

    curve = tuple(
        CurvePoint(float(thresholds[k]), float(sens[k]), float(ppv[k]),
                   float(f1[k]), float(mcc[k]))
        for k in range(thresholds.size)
    )
    grid = _interpolate_grid(sens, ppv, f1, mcc, sensitivity_grid)
    return MetricsReport(curve=curve, auc=auc, grid=grid,
                         num_positive=num_pos, num_negative=num_neg)


def _interpolate_grid(sens, ppv, f1, mcc, targets) -> tuple:
    # Best operating point per distinct sensitivity: the one with maximal
    # ppv (fewest false positives at that recall), which also maximizes the
    # other metrics there.
    env_sens, inverse = np.unique(sens, return_inverse=True)
    best = np.full(env_sens.size, -1)
    best_ppv = np.full(env_sens.size, -1.0)
    for k in range(sens.size):
        g = inverse[k]
        if ppv[k] > best_ppv[g]:
            best_ppv[g] = ppv[k]
            best[g] = k
    rows = []
    for t in targets:
        rows.append(GridRow(
            target_sensitivity=float(t),
            ppv=float(np.interp(t, env_sens, ppv[best])),
            f1=float(np.interp(t, env_sens, f1[best])),
            mcc=float(np.interp(t, env_sens, mcc[best])),
        ))
    return tuple(rows)


# --------------------------------------------------------------------------
# Features-only baseline
# --------------------------------------------------------------------------


def baseline_score(cohort: Cohort, params: ModelParams) -> np.ndarray:
    """Physician ranking from physician evidence alone — no message passing.

    The class prior on y_i is what the patient prior eta implies through
    the coupling rule for a physician with patient_count linked patients:
    p(y=1) = 1 - (1-eta)^count.  Combined with the physician feature
    likelihoods by Bayes rule.
    """
    ll = physician_log_likelihoods(cohort, params)
    counts = cohort.physicians.patient_count.astype(np.float64)
    log_prior0 = counts * np.log1p(-params.patient.prior_eta)
    with np.errstate(divide="ignore"):
        log_prior1 = np.log(-np.expm1(log_prior0))
    return expit((ll[:, 1] + log_prior1) - (ll[:, 0] + log_prior0))


def graph_score(cohort: Cohort, params: ModelParams,
                damping: float = DEFAULT_DAMPING, tol: float = DEFAULT_TOL,
                max_iters: int = DEFAULT_MAX_ITERS):
    """Physician posteriors from full inference; labels are never consulted.

    Returns (scores, InferenceResult) so callers can inspect convergence.
    """
    result = run_inference(build(cohort, params), damping=damping, tol=tol,
                           max_iters=max_iters)
    return result.physician_posterior, result


# --------------------------------------------------------------------------
# Cross-validation harness
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldOutcome:
    fold: int
    included: bool
    reason: str
    n_train_physicians: int
    n_test_physicians: int
    n_test_positive: int
    model: MetricsReport | None
    baseline: MetricsReport | None
    converged: bool


@dataclass(frozen=True)
class CrossvalReport:
    folds: tuple
    sensitivity_grid: tuple
    model_mean_auc: float
    baseline_mean_auc: float
    model_mean_grid: tuple
    baseline_mean_grid: tuple

    @property
    def num_included(self) -> int:
        return sum(1 for f in self.folds if f.included)

    def to_json_dict(self) -> dict:
        return {
            "model_mean_auc": self.model_mean_auc,
            "baseline_mean_auc": self.baseline_mean_auc,
            "num_included": self.num_included,
            "model_mean_grid": [asdict(r) for r in self.model_mean_grid],
            "baseline_mean_grid": [asdict(r) for r in self.baseline_mean_grid],
            "folds": [
                {
                    "fold": f.fold,
                    "included": f.included,
                    "reason": f.reason,
                    "n_train_physicians": f.n_train_physicians,
                    "n_test_physicians": f.n_test_physicians,
                    "n_test_positive": f.n_test_positive,
                    "converged": f.converged,
                    "model": f.model.to_json_dict() if f.model else None,
                    "baseline": f.baseline.to_json_dict() if f.baseline else None,
                }
                for f in self.folds
            ],
        }


def fold_assignments(num_physicians: int, folds: int, seed) -> np.ndarray:
    """Fold index per physician: a seeded permutation cut into near-equal groups."""
    if folds < 2:
        raise ParameterError(f"need at least 2 folds, got {folds}")
    if folds > num_physicians:
        raise ParameterError(
            f"cannot cut {num_physicians} physicians into {folds} folds"
        )
    perm = np.random.default_rng(seed).permutation(num_physicians)
    assignment = np.empty(num_physicians, dtype=np.int64)
    for k, group in enumerate(np.array_split(perm, folds)):
        assignment[group] = k
    return assignment


def crossval(cohort: Cohort, folds: int, seed, *,
             damping: float = DEFAULT_DAMPING, tol: float = DEFAULT_TOL,
             max_iters: int = DEFAULT_MAX_ITERS,
             smoothing: float = DEFAULT_SMOOTHING,
             prior_eta: float = DEFAULT_PRIOR_ETA,
             sensitivity_grid=DEFAULT_SENSITIVITY_GRID) -> CrossvalReport:
    """Physician-level k-fold experiment with the leakage-safe split.

    Each fold's physicians are held out; any patient touching a held-out
    physician moves entirely to the test side, so no test patient ever
    appears in a training edge.  Folds whose train or test side degenerates
    to a single class are excluded from the averages with a warning.
    """
    assignment = fold_assignments(cohort.num_physicians, folds, seed)
    outcomes = []
    for k in range(folds):
        outcomes.append(
            _one_fold(cohort, assignment == k, k, damping, tol, max_iters,
                      smoothing, prior_eta, sensitivity_grid)
        )

    included = [f for f in outcomes if f.included]
    if not included:
        warnings.warn("no usable folds; averages undefined (reported as 0)")
    model_auc = float(np.mean([f.model.auc for f in included])) if included else 0.0
    base_auc = float(np.mean([f.baseline.auc for f in included])) if included else 0.0

    def mean_grid(which):
        rows = []
        for idx, t in enumerate(sensitivity_grid):
            if included:
                pick = [getattr(f, which).grid[idx] for f in included]
                rows.append(GridRow(
                    target_sensitivity=float(t),
                    ppv=float(np.mean([r.ppv for r in pick])),
                    f1=float(np.mean([r.f1 for r in pick])),
                    mcc=float(np.mean([r.mcc for r in pick])),
                ))
            else:
                rows.append(GridRow(float(t), 0.0, 0.0, 0.0))
        return tuple(rows)

    return CrossvalReport(
        folds=tuple(outcomes),
        sensitivity_grid=tuple(float(t) for t in sensitivity_grid),
        model_mean_auc=model_auc,
        baseline_mean_auc=base_auc,
        model_mean_grid=mean_grid("model"),
        baseline_mean_grid=mean_grid("baseline"),
    )


def _one_fold(cohort, test_mask, k, damping, tol, max_iters, smoothing,
              prior_eta, sensitivity_grid) -> FoldOutcome:
    train, test = split_by_physician_mask(cohort, test_mask)
    skeleton = dict(
        fold=k, n_train_physicians=train.num_physicians,
        n_test_physicians=test.num_physicians,
        n_test_positive=int((test.physicians.labels == 1).sum()),
        model=None, baseline=None, converged=False,
    )

    y_test = test.physicians.labels
    for side, labels in (("test", y_test), ("train", train.physicians.labels)):
        classes = np.unique(labels[labels >= 0])
        if classes.size < 2:
            warnings.warn(
                f"fold {k}: {side} physicians are single-class; fold excluded"
            )
            return FoldOutcome(included=False, reason=f"single-class {side} side",
                               **skeleton)

    params = fit(train, smoothing=smoothing, prior_eta=prior_eta)
    model_scores, result = graph_score(test, params, damping=damping, tol=tol,
                                       max_iters=max_iters)
    base_scores = baseline_score(test, params)
    skeleton.update(
        model=curve_and_auc(model_scores, y_test, sensitivity_grid),
        baseline=curve_and_auc(base_scores, y_test, sensitivity_grid),
        converged=result.all_converged,
    )
    return FoldOutcome(included=True, reason="", **skeleton)


# --------------------------------------------------------------------------
# Artifact writers
# --------------------------------------------------------------------------


def save_metrics_json(report: MetricsReport, path, extra: dict | None = None) -> None:
    doc = report.to_json_dict()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def save_curve_csv(report: MetricsReport, path) -> None:
    frame = pd.DataFrame([asdict(p) for p in report.curve], columns=CURVE_COLUMNS)
    frame.to_csv(path, index=False)


def save_folds_csv(report: CrossvalReport, path) -> None:
    """One row per (fold, method), then mean rows over included folds."""
    rows = []

    def metric_cols(auc, grid):
        cols = {"auc": auc}
        for r in grid:
            tag = f"{r.target_sensitivity:.2f}"
            cols[f"ppv_at_{tag}"] = r.ppv
            cols[f"f1_at_{tag}"] = r.f1
            cols[f"mcc_at_{tag}"] = r.mcc
        return cols

    empty = tuple(GridRow(float(t), 0.0, 0.0, 0.0) for t in report.sensitivity_grid)
    for f in report.folds:
        for method in ("model", "baseline"):
            rep = getattr(f, method)
            rows.append({
                "fold": str(f.fold), "method": method,
                "included": f.included,
                "n_test_physicians": f.n_test_physicians,
                "n_test_positive": f.n_test_positive,
                **metric_cols(rep.auc if rep else 0.0, rep.grid if rep else empty),
            })
    rows.append({
        "fold": "mean", "method": "model", "included": True,
        "n_test_physicians": "", "n_test_positive": "",
        **metric_cols(report.model_mean_auc, report.model_mean_grid),
    })
    rows.append({
        "fold": "mean", "method": "baseline", "included": True,
        "n_test_physicians": "", "n_test_positive": "",
        **metric_cols(report.baseline_mean_auc, report.baseline_mean_grid),
    })
    pd.DataFrame(rows).to_csv(path, index=False)
