"""Partition agreement scores and prediction error.

Pair-counting scores compare two labellings of the same items through the
pairs they put together.  Counts come from the contingency table, so no
pair enumeration is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .selection import ClusterAssignment, canonical_labels


@dataclass(frozen=True)
class PairConfusion:
    """Pair counts between a predicted and a true partition.

    ``tp``: pairs together in both; ``fp``: together only in the prediction;
    ``fn``: together only in the truth; ``tn``: apart in both.
    """

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def _comb2(x):
    x = np.asarray(x, dtype=np.int64)
    return int((x * (x - 1) // 2).sum())


def contingency(pred, truth) -> np.ndarray:
    """Counts ``table[a, b]`` of items with predicted label ``a`` and true label ``b``."""
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise InputError(f"label vectors differ in length: {pred.size} vs {truth.size}")
    if pred.size == 0:
        return np.zeros((0, 0), dtype=np.int64)
    pred, truth = canonical_labels(pred), canonical_labels(truth)
    table = np.zeros((pred.max() + 1, truth.max() + 1), dtype=np.int64)
    np.add.at(table, (pred, truth), 1)
    return table


def pair_confusion(pred, truth) -> PairConfusion:
    table = contingency(pred, truth)
    n = int(table.sum())
    both = _comb2(table)
    same_pred = _comb2(table.sum(axis=1))
    same_true = _comb2(table.sum(axis=0))
    tp = both
    fp = same_pred - both
    fn = same_true - both
    tn = n * (n - 1) // 2 - tp - fp - fn
    return PairConfusion(tp, fp, fn, tn)


def f1_score(pred, truth) -> float:
    """Pair-counting F-1 ``2TP / (2TP + FP + FN)``; 0 when there are no true positives."""
    c = pair_confusion(pred, truth)
    if c.tp == 0:
        return 0.0
    return 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn)


def jaccard_index(pred, truth) -> float:
    """Pair-counting Jaccard ``TP / (TP + FP + FN)``; 1 when both partitions are all singletons."""
    c = pair_confusion(pred, truth)
    denom = c.tp + c.fp + c.fn
    return 1.0 if denom == 0 else c.tp / denom


def adjusted_rand(pred, truth) -> float:
    """Adjusted Rand index under the permutation model.

    Defined as 1 when the maximum index equals its expectation, which happens
    only when both partitions are trivial and equal.
    """
    table = contingency(pred, truth)
    n = int(table.sum())
    index = _comb2(table)
    a = _comb2(table.sum(axis=1))
    b = _comb2(table.sum(axis=0))
    total = n * (n - 1) // 2
    expected = a * b / total if total else 0.0
    max_index = 0.5 * (a + b)
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


def bicluster_labels(assignment: ClusterAssignment) -> np.ndarray:
    """One label per matrix cell (row-major), identifying its (row, column) cluster pair."""
    rows = np.asarray(assignment.row_labels, dtype=np.int64)
    cols = np.asarray(assignment.col_labels, dtype=np.int64)
    pair = rows[:, None] * (int(cols.max()) + 1 if cols.size else 1) + cols[None, :]
    return canonical_labels(pair.ravel())


def cluster_scores(pred: ClusterAssignment, truth: ClusterAssignment) -> dict:
    """F-1, Jaccard and ARI on the bi-cluster, row and column partitions."""
    if (pred.row_labels.size, pred.col_labels.size) != (truth.row_labels.size,
                                                         truth.col_labels.size):
        raise InputError("assignments cover different numbers of rows or columns")
    out = {}
    for name, a, b in (("bicluster", bicluster_labels(pred), bicluster_labels(truth)),
                       ("rows", pred.row_labels, truth.row_labels),
                       ("columns", pred.col_labels, truth.col_labels)):
        out[name] = {"f1": f1_score(a, b), "jaccard": jaccard_index(a, b),
                     "ari": adjusted_rand(a, b)}
    return out


def rmse(pred, actual) -> float:
    """Root mean squared entrywise difference."""
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape:
        raise InputError(f"shape mismatch {pred.shape} vs {actual.shape}")
    if pred.size == 0:
        raise InputError("rmse of an empty matrix is undefined")
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


def prediction_rmse(data, theta) -> float:
    """RMSE of ``X theta`` against the responses of ``data``."""
    return rmse(data.predict(theta), data.responses)


def recovery_accuracy(theta_hat, theta_star) -> float:
    """Relative Frobenius error ``||theta_hat - theta_star|| / ||theta_star||`` (0 is perfect)."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    if theta_hat.shape != theta_star.shape:
        raise InputError(f"shape mismatch {theta_hat.shape} vs {theta_star.shape}")
    ref = np.linalg.norm(theta_star)
    if ref == 0:
        raise InputError("recovery accuracy is undefined for a zero true matrix")
    return float(np.linalg.norm(theta_hat - theta_star) / ref)
