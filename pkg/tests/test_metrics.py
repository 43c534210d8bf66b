from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifuse.errors import InputError
from bifuse.metrics import (adjusted_rand, bicluster_labels, cluster_scores, f1_score,
                            jaccard_index, pair_confusion, prediction_rmse,
                            recovery_accuracy, rmse)
from bifuse.model import TaskDataset
from bifuse.selection import ClusterAssignment


def enumerate_pairs(pred, truth):
    """O(m^2) loop over unordered pairs."""
    tp = fp = fn = tn = 0
    for a, b in combinations(range(len(pred)), 2):
        same_p, same_t = pred[a] == pred[b], truth[a] == truth[b]
        tp += same_p and same_t
        fp += same_p and not same_t
        fn += same_t and not same_p
        tn += not same_p and not same_t
    return tp, fp, fn, tn


def oracle_scores(pred, truth):
    """Scores from enumerated pairs, with exact rational arithmetic."""
    tp, fp, fn, tn = enumerate_pairs(pred, truth)
    f1 = Fraction(0) if tp == 0 else Fraction(2 * tp, 2 * tp + fp + fn)
    ji = Fraction(1) if tp + fp + fn == 0 else Fraction(tp, tp + fp + fn)
    # Hubert-Arabie ARI written in pair counts
    num = 2 * (tp * tn - fn * fp)
    den = (tp + fn) * (fn + tn) + (tp + fp) * (fp + tn)
    ari = Fraction(1) if den == 0 else Fraction(num, den)
    return (tp, fp, fn, tn), f1, ji, ari


def contingency_ari(pred, truth):
    """ARI straight from its contingency-table definition."""
    m = len(pred)
    ps, ts = sorted(set(pred)), sorted(set(truth))
    nij = [[sum(1 for a in range(m) if pred[a] == u and truth[a] == v) for v in ts] for u in ps]
    index = sum(comb(x, 2) for row in nij for x in row)
    a = sum(comb(sum(row), 2) for row in nij)
    b = sum(comb(sum(nij[r][c] for r in range(len(ps))), 2) for c in range(len(ts)))
    expected = Fraction(a * b, comb(m, 2))
    top = Fraction(a + b, 2)
    if top == expected:
        return Fraction(1)
    return (index - expected) / (top - expected)


def test_worked_pair_counts():
    c = pair_confusion([1, 1, 2, 2], [1, 1, 2, 2])
    assert (c.tp, c.fp, c.fn, c.tn) == (2, 0, 0, 4)
    c = pair_confusion([1, 1, 2, 2], [1, 1, 2, 3])
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 0, 4)
    c = pair_confusion([0, 1, 2, 3], [0, 0, 1, 1])
    assert c.tp == c.fp == 0


def test_worked_scores():
    assert f1_score([1, 1, 2, 2], [1, 1, 2, 3]) == pytest.approx(2 / 3, abs=1e-15)
    assert f1_score([1, 1, 2], [1, 2, 2]) == 0.0
    assert jaccard_index([1, 1, 2, 2], [1, 1, 2, 3]) == 0.5
    assert jaccard_index([0, 1, 2], [5, 6, 7]) == 1.0
    assert adjusted_rand([1, 1, 2, 2], [1, 1, 1, 2]) == 0.0
    for f in (f1_score, jaccard_index, adjusted_rand):
        assert f([3, 3, 1, 0, 0], [0, 0, 1, 2, 2]) == 1.0


def test_length_mismatch():
    with pytest.raises(InputError):
        pair_confusion([0, 1], [0, 1, 2])


def test_scores_match_enumeration_oracle():
    rng = np.random.default_rng(20240601)
    for _ in range(1000):
        m = int(rng.integers(2, 13))
        pred = rng.integers(0, rng.integers(1, m + 1), size=m).tolist()
        truth = rng.integers(0, rng.integers(1, m + 1), size=m).tolist()
        counts, f1, ji, ari = oracle_scores(pred, truth)
        c = pair_confusion(pred, truth)
        assert (c.tp, c.fp, c.fn, c.tn) == counts
        assert f1_score(pred, truth) == float(f1)
        assert jaccard_index(pred, truth) == float(ji)
        assert adjusted_rand(pred, truth) == pytest.approx(float(ari), abs=1e-12)
        assert adjusted_rand(pred, truth) == pytest.approx(float(contingency_ari(pred, truth)),
                                                           abs=1e-12)


labels = st.integers(2, 12).flatmap(
    lambda m: st.tuples(st.lists(st.integers(0, 4), min_size=m, max_size=m),
                        st.lists(st.integers(0, 4), min_size=m, max_size=m)))


@settings(max_examples=200, deadline=None)
@given(labels, st.permutations(range(5)))
def test_scores_invariant_to_relabelling(pair, perm):
    pred, truth = pair
    relabel = [perm[v] for v in pred]
    for f in (f1_score, jaccard_index, adjusted_rand):
        assert f(relabel, truth) == pytest.approx(f(pred, truth), abs=1e-12)
        assert f(pred, [perm[v] for v in truth]) == pytest.approx(f(pred, truth), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(labels)
def test_jaccard_below_f1_and_counts_total(pair):
    pred, truth = pair
    assert jaccard_index(pred, truth) <= f1_score(pred, truth) + 1e-15 or \
        pair_confusion(pred, truth).tp == 0
    c = pair_confusion(pred, truth)
    assert c.total == comb(len(pred), 2)
    assert adjusted_rand(pred, pred) == 1.0


def test_random_partitions_ari_near_zero():
    rng = np.random.default_rng(7)
    vals = [adjusted_rand(rng.integers(0, 4, 60), rng.integers(0, 4, 60)) for _ in range(200)]
    assert -0.1 <= np.mean(vals) <= 0.1


def test_bicluster_labels():
    one = ClusterAssignment(np.zeros(3, int), np.zeros(4, int))
    assert set(bicluster_labels(one)) == {0}
    two_three = ClusterAssignment([0, 0, 1], [0, 1, 2, 2])
    lab = bicluster_labels(two_three)
    assert lab.shape == (12,) and len(set(lab)) == 6
    # row-major: cell (r, c) sits at r * k + c
    assert lab[0] == lab[4] and lab[2] == lab[3] and lab[0] != lab[8]
    # canonical order of first occurrence
    assert lab[0] == 0 and lab[1] == 1 and lab[2] == 2


def test_bicluster_labels_permutation_within_cluster():
    a = ClusterAssignment([0, 1, 0, 1, 2], [0, 0, 1])
    # permuting rows 0 and 2 (same cluster) changes nothing
    b = ClusterAssignment(np.asarray(a.row_labels)[[2, 1, 0, 3, 4]], a.col_labels)
    assert adjusted_rand(bicluster_labels(a), bicluster_labels(b)) == 1.0


def test_cluster_scores_identity():
    a = ClusterAssignment([0, 0, 1, 1], [0, 1, 1])
    for s in cluster_scores(a, a).values():
        assert s == {"f1": 1.0, "jaccard": 1.0, "ari": 1.0}


def test_rmse_and_recovery():
    A = np.arange(6.0).reshape(2, 3)
    assert rmse(A, A) == 0.0
    assert rmse(A + np.array([[1, -1, 1], [-1, 1, -1]]), A) == 1.0
    assert recovery_accuracy(A, A) == 0.0
    assert recovery_accuracy(2 * A, A) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(InputError):
        recovery_accuracy(A, np.zeros_like(A))
    with pytest.raises(InputError):
        rmse(A, A.T)


def test_prediction_rmse():
    X = np.eye(3)
    theta = np.ones((3, 2))
    data = TaskDataset(X, X @ theta + 1.0)
    assert prediction_rmse(data, theta) == pytest.approx(1.0)
