"""Support-recovery and prediction metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyTruthError

__all__ = ["pr_auc", "coefficient_mse", "support_f1", "EvalResult",
           "evaluate_estimate"]


def pr_auc(estimate, truth_support) -> float:
    """Area under the precision-recall curve, as average precision.

    Features are ranked by decreasing |estimate| with ties broken by
    ascending feature index; the returned value is the mean of the
    precision at each true feature's rank, which equals the exhaustive
    threshold-enumeration area. An identically-zero estimate scores the
    random-ranking baseline |truth| / p.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(sorted(set(int(i) for i in truth_support)))
    p = estimate.shape[0]
    if truth.size == 0:
        raise EmptyTruthError("true support is empty")
    if truth.min() < 0 or truth.max() >= p:
        raise IndexError("true support index out of range")
    scores = np.abs(estimate)
    if not scores.any():
        return truth.size / p
    order = np.lexsort((np.arange(p), -scores))
    relevant = np.zeros(p, dtype=bool)
    relevant[truth] = True
    hits = relevant[order]
    cum_hits = np.cumsum(hits)
    ranks = np.arange(1, p + 1)
    precision_at_hits = cum_hits[hits] / ranks[hits]
    return float(precision_at_hits.sum() / truth.size)


def coefficient_mse(estimate, truth) -> float:
    """Mean squared coefficient error against the true vector."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    return float(np.mean((estimate - truth) ** 2))


def support_f1(estimate, truth_support, threshold: float = 0.0) -> float:
    """F1 of {|estimate| > threshold} against the true support."""
    estimate = np.asarray(estimate, dtype=float)
    truth = set(int(i) for i in truth_support)
    if not truth:
        raise EmptyTruthError("true support is empty")
    predicted = set(np.flatnonzero(np.abs(estimate) > threshold).tolist())
    tp = len(predicted & truth)
    if tp == 0:
        return 0.0
    precision = tp / len(predicted)
    recall = tp / len(truth)
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class EvalResult:
    auc_pr: np.ndarray          # (T,)
    auc_pr_mean: float
    mse: np.ndarray             # (T,)
    support_f1: np.ndarray      # (T,)


def evaluate_estimate(coefficients, truth_coefficients,
                      threshold: float = 0.0) -> EvalResult:
    """Score a (p, T) estimate column-by-column against the truth."""
    coefficients = np.asarray(coefficients, dtype=float)
    truth_coefficients = np.asarray(truth_coefficients, dtype=float)
    T = coefficients.shape[1]
    aucs = np.empty(T)
    mses = np.empty(T)
    f1s = np.empty(T)
    for t in range(T):
        support = np.flatnonzero(truth_coefficients[:, t])
        aucs[t] = pr_auc(coefficients[:, t], support)
        mses[t] = coefficient_mse(coefficients[:, t],
                                  truth_coefficients[:, t])
        f1s[t] = support_f1(coefficients[:, t], support, threshold)
    return EvalResult(auc_pr=aucs, auc_pr_mean=float(aucs.mean()),
                      mse=mses, support_f1=f1s)
