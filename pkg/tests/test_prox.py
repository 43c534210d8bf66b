from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from bifuse.errors import InputError
from bifuse.model import AxisEdges, EdgeWeights, TaskDataset
from bifuse.prox import (Cobra, ProxConfig, cobra, cobra_objective, prox_fusion, prox_l1,
                         prox_ridge, stack, unstack)

TIGHT = ProxConfig(inner_tol=1e-10, inner_max_iter=200000)


def random_axis(rng, m, signed=False):
    pairs = [(a, b) for a in range(m) for b in range(a + 1, m) if rng.random() < 0.7]
    pairs = pairs or [(0, 1)]
    return AxisEdges.from_list([(a, b, rng.uniform(0.1, 1.0),
                                 rng.choice([-1, 1]) if signed else 1) for a, b in pairs])


def fusion_objective(A, B, edges, nu, axis="columns"):
    e = EdgeWeights(edges, AxisEdges()) if axis == "columns" else EdgeWeights(AxisEdges(), edges)
    return cobra_objective(A, B, e, nu)


def test_stack_roundtrip():
    T = np.arange(6.0).reshape(3, 2)
    assert stack(T).tolist() == [0, 2, 4, 1, 3, 5]
    assert np.array_equal(unstack(stack(T), 3, 2), T)


def test_ridge_examples():
    data = TaskDataset(np.zeros((4, 3)), np.ones((4, 2)))
    b = np.arange(6.0)
    assert np.allclose(prox_ridge(b, data, 0.8), b)
    one = TaskDataset(np.ones((1, 1)), np.ones((1, 1)))
    assert prox_ridge(np.zeros(1), one, 1.0)[0] == pytest.approx(2 / 3, abs=1e-15)
    with pytest.raises(InputError):
        prox_ridge(np.zeros(2), one, 1.0)
    with pytest.raises(InputError):
        prox_ridge(np.array([np.nan]), one, 1.0)


def test_ridge_matches_gradient_descent():
    rng = np.random.default_rng(0)
    X, Y = rng.normal(size=(4, 3)), rng.normal(size=(4, 2))
    data, sigma = TaskDataset(X, Y), 0.7
    B = rng.normal(size=(3, 2))
    L = 2 * sigma * np.linalg.eigvalsh(X.T @ X)[-1] + 1
    A = B.copy()
    for _ in range(20000):
        A -= (2 * sigma * X.T @ (X @ A - Y) + (A - B)) / L
    assert np.allclose(unstack(prox_ridge(stack(B), data, sigma), 3, 2), A, atol=1e-6)


def test_ridge_per_task_designs():
    rng = np.random.default_rng(1)
    Xs = [rng.normal(size=(5, 3)) for _ in range(2)]
    Y = rng.normal(size=(5, 2))
    b = rng.normal(size=6)
    got = unstack(prox_ridge(b, TaskDataset.per_task(Xs, Y), 0.3), 3, 2)
    for s in range(2):
        single = TaskDataset(Xs[s], Y[:, [s]])
        assert np.allclose(got[:, s], prox_ridge(unstack(b, 3, 2)[:, s], single, 0.3))


def test_l1_examples_and_scalar_oracle():
    assert prox_l1(np.array([2.0, -0.5]), 1.0).tolist() == [1.0, 0.0]
    b = np.random.default_rng(2).normal(size=12) * 3
    assert np.array_equal(prox_l1(b, 0.0), b)
    t = 0.8
    got = prox_l1(b, t)
    for bi, gi in zip(b, got):
        # bisection on the monotone subgradient a - b + t * sign(a)
        lo, hi = -abs(bi) - t - 1, abs(bi) + t + 1
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid - bi + t * np.sign(mid) > 0:
                hi = mid
            else:
                lo = mid
        assert gi == pytest.approx(0.5 * (lo + hi), abs=1e-8)
        obj = lambda a: t * abs(a) + 0.5 * (a - bi) ** 2  # noqa: E731
        assert obj(gi) <= minimize_scalar(obj, bounds=(-20, 20), method="bounded").fun + 1e-12
    with pytest.raises(InputError):
        prox_l1(b, -1.0)


def test_fusion_examples():
    e = AxisEdges.from_list([(0, 1, 1.0)])
    M = np.array([[0.0, 4.0]])
    assert np.array_equal(prox_fusion(M, e, 0.0).value, M)
    assert np.allclose(prox_fusion(M, e, 1.0, TIGHT).value, [[1.0, 3.0]], atol=1e-8)
    for nu in (2.0, 5.0):
        assert np.allclose(prox_fusion(M, e, nu, TIGHT).value, [[2.0, 2.0]], atol=1e-8)
    # full fusion on a connected graph collapses to the grand mean
    rng = np.random.default_rng(3)
    M = rng.normal(size=(3, 5))
    chain = AxisEdges.from_list([(a, a + 1, 1.0) for a in range(4)])
    A = prox_fusion(M, chain, 1e3, TIGHT).value
    assert np.allclose(A, M.mean(axis=1, keepdims=True), atol=1e-6)
    with pytest.raises(InputError):
        prox_fusion(M, chain, -1.0)


def test_fusion_rows_axis_matches_transpose():
    rng = np.random.default_rng(4)
    M = rng.normal(size=(4, 3))
    e = random_axis(rng, 4, signed=True)
    a = prox_fusion(M, e, 0.7, TIGHT, axis="rows").value
    b = prox_fusion(M.T, e, 0.7, TIGHT, axis="columns").value
    assert np.allclose(a, b.T, atol=1e-12)


def test_fusion_warm_start_dual():
    rng = np.random.default_rng(5)
    M = rng.normal(size=(3, 5))
    e = random_axis(rng, 5)
    cold = prox_fusion(M, e, 0.6, TIGHT)
    warm = prox_fusion(M + 1e-3, e, 0.6, TIGHT, dual=cold.dual)
    ref = prox_fusion(M + 1e-3, e, 0.6, TIGHT)
    assert warm.iterations <= ref.iterations
    assert np.allclose(warm.value, ref.value, atol=1e-8)


def test_fusion_iteration_cap_flags():
    rng = np.random.default_rng(6)
    M = rng.normal(size=(3, 5))
    r = prox_fusion(M, random_axis(rng, 5), 2.0, ProxConfig(inner_tol=1e-14, inner_max_iter=2))
    assert not r.converged and r.iterations == 2 and np.isfinite(r.value).all()


seeds = st.integers(0, 2**31 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_fusion_first_order_probe_and_nonexpansive(seed):
    rng = np.random.default_rng(seed)
    p, k = int(rng.integers(1, 5)), int(rng.integers(2, 5))
    e = random_axis(rng, k, signed=seed % 2 == 0)
    nu = rng.uniform(0.05, 2)
    B1, B2 = rng.normal(size=(p, k)), rng.normal(size=(p, k))
    A1 = prox_fusion(B1, e, nu, TIGHT).value
    A2 = prox_fusion(B2, e, nu, TIGHT).value
    g = fusion_objective(A1, B1, e, nu)
    for _ in range(100):
        d = rng.normal(size=(p, k))
        d *= 1e-3 / np.linalg.norm(d)
        assert g <= fusion_objective(A1 + d, B1, e, nu) + 1e-12
    assert np.linalg.norm(A1 - A2) <= np.linalg.norm(B1 - B2) + 1e-8


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_fusion_translation_invariance(seed):
    rng = np.random.default_rng(seed)
    p, k = int(rng.integers(1, 5)), int(rng.integers(2, 5))
    e = random_axis(rng, k)
    B = rng.normal(size=(p, k))
    shift = rng.normal(size=(p, 1))
    a = prox_fusion(B + shift, e, 0.8, TIGHT).value
    b = prox_fusion(B, e, 0.8, TIGHT).value + shift
    assert np.allclose(a, b, atol=1e-7)


def test_cobra_examples():
    rng = np.random.default_rng(7)
    T = rng.normal(size=(4, 3))
    edges = EdgeWeights(random_axis(rng, 3), random_axis(rng, 4))
    assert np.array_equal(cobra(T, edges, 0.0).value, T)
    only_cols = EdgeWeights(edges.columns, AxisEdges())
    assert np.allclose(cobra(T, only_cols, 0.9, TIGHT).value,
                       prox_fusion(T, edges.columns, 0.9, TIGHT).value, atol=1e-12)
    with pytest.raises(InputError):
        cobra(T, edges, -1.0)
    with pytest.raises(InputError):
        Cobra((3, 3), edges)(T, 1.0)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_cobra_first_order_probe_and_trace(seed):
    rng = np.random.default_rng(seed)
    p, k = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    edges = EdgeWeights(random_axis(rng, k, signed=True), random_axis(rng, p))
    nu = rng.uniform(0.05, 2)
    T = rng.normal(size=(p, k)) * 2
    cfg = ProxConfig(inner_tol=1e-9, inner_max_iter=100000)
    res = cobra(T, edges, nu, cfg)
    g = cobra_objective(res.value, T, edges, nu)
    for _ in range(100):
        d = rng.normal(size=(p, k))
        d *= 1e-3 / np.linalg.norm(d)
        assert g <= cobra_objective(res.value + d, T, edges, nu) + 1e-9
    best = min(res.objective_trace)
    assert res.objective_trace[-1] - best <= cfg.inner_tol * (1 + abs(best))


def test_cobra_reuse_warm_start():
    rng = np.random.default_rng(8)
    T = rng.normal(size=(4, 5))
    edges = EdgeWeights(random_axis(rng, 5), random_axis(rng, 4))
    solver = Cobra(T.shape, edges, TIGHT)
    first = solver(T, 0.5)
    second = solver(T, 0.5)
    assert np.allclose(first.value, second.value, atol=1e-8)


def test_cobra_warm_corrections_match_cold_solve():
    rng = np.random.default_rng(9)
    edges = EdgeWeights(random_axis(rng, 5), random_axis(rng, 4))
    solver = Cobra((4, 5), edges, TIGHT)
    for nu in (0.3, 0.3, 1.2, 0.05):
        T = rng.normal(size=(4, 5))
        warm = solver(T, nu)
        cold = cobra(T, edges, nu, TIGHT)
        assert np.allclose(warm.value, cold.value, atol=1e-7)
    loose = solver(T, 0.05, tol=1e-3)
    assert np.linalg.norm(loose.value - cold.value) <= 1e-2 * (1 + np.linalg.norm(cold.value))
