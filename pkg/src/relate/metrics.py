"""Evaluation metrics: pairwise AUC and mean absolute error.

AUC uses fractional ranks, which equals the pairwise definition
(concordant + half of ties) / (positives * negatives) without the
quadratic loop; the test suite holds the two routes equal.
"""

from __future__ import annotations

import numpy as np


class MetricError(ValueError):
    """Metric undefined for the given labels (e.g. single-class AUC)."""


def _fractional_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank range."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricError(f"scores {scores.shape} and labels {labels.shape} must be equal-length vectors")
    pos = labels == 1.0
    neg = labels == 0.0
    if not np.all(pos | neg):
        raise MetricError("classification labels must be 0 or 1")
    n_pos = int(pos.sum())
    n_neg = int(neg.sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricError(f"AUC needs both classes, got {n_pos} positives and {n_neg} negatives")
    ranks = _fractional_ranks(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def mae(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape:
        raise MetricError(f"predictions {predictions.shape} and targets {targets.shape} differ in shape")
    return float(np.abs(predictions - targets).mean())


def evaluate(predictions, labels, kind: str) -> float:
    if kind == "classification":
        return roc_auc(predictions, labels)
    if kind == "regression":
        return mae(predictions, labels)
    raise MetricError(f"unknown task kind {kind!r}")
