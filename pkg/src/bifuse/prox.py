"""Proximal operators used by both solvers.

All operators follow the convention ``prox_f(b) = argmin_a f(a) + 0.5 ||a - b||^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit
from scipy.linalg import cho_factor, cho_solve

from .errors import InputError
from .model import AxisEdges, EdgeWeights, TaskDataset, _check_axis, fusion_penalty


@dataclass(frozen=True)
class ProxConfig:
    """Inner-solver controls for the fusion prox and COBRA.

    ``inner_tol`` bounds the relative error of each fusion prox (certified
    through the duality gap) and the relative change of COBRA's iterate
    between sweeps.
    """

    inner_tol: float = 1e-6
    inner_max_iter: int = 10000
    ama_step: float | str = "auto"

    def __post_init__(self):
        if not self.inner_tol > 0:
            raise InputError("inner_tol must be positive")
        if self.inner_max_iter < 1:
            raise InputError("inner_max_iter must be positive")
        if self.ama_step != "auto" and not float(self.ama_step) > 0:
            raise InputError("ama_step must be positive or 'auto'")


def stack(theta) -> np.ndarray:
    """``(theta_1; ...; theta_k)``: task columns stacked into one vector."""
    return np.asarray(theta, dtype=float).ravel(order="F")


def unstack(b, p: int, k: int) -> np.ndarray:
    return np.asarray(b, dtype=float).reshape((p, k), order="F")


def _finite(x, name):
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise InputError(f"{name} contains non-finite values")
    return x


# ---------------------------------------------------------------------------
# squared loss


class RidgeProx:
    """Prox of ``sigma * ||Y - X theta||_F^2`` with cached factorisations.

    Each task solves ``(sigma X'X + I/2) a = sigma X'y + b/2``.  The system
    matrix is positive definite for every design, so the Cholesky factor is
    computed once and reused.
    """

    def __init__(self, data: TaskDataset, sigma: float):
        if not sigma > 0:
            raise InputError("sigma must be positive")
        self.data = data
        self.sigma = float(sigma)
        p = data.p
        eye = 0.5 * np.eye(p)
        if data.shared:
            X = data.designs
            self._factors = cho_factor(sigma * (X.T @ X) + eye)
            self._rhs = sigma * (X.T @ data.responses)
        else:
            self._factors = [cho_factor(sigma * (X.T @ X) + eye) for X in data.designs]
            self._rhs = sigma * np.column_stack(
                [X.T @ data.responses[:, s] for s, X in enumerate(data.designs)])

    def __call__(self, B: np.ndarray) -> np.ndarray:
        """Apply to a ``p x k`` matrix."""
        rhs = self._rhs + 0.5 * B
        if self.data.shared:
            return cho_solve(self._factors, rhs)
        return np.column_stack([cho_solve(f, rhs[:, s]) for s, f in enumerate(self._factors)])


def prox_ridge(b, data: TaskDataset, sigma: float) -> np.ndarray:
    """Prox of ``sigma * ||Y - X Theta||_F^2`` on a stacked vector."""
    b = _finite(b, "b")
    if b.shape != (data.p * data.k,):
        raise InputError(f"b must have length p*k = {data.p * data.k}")
    return stack(RidgeProx(data, sigma)(unstack(b, data.p, data.k)))


# ---------------------------------------------------------------------------
# l1


def prox_l1(b, threshold: float) -> np.ndarray:
    """Entrywise soft-thresholding."""
    if threshold < 0:
        raise InputError("threshold must be nonnegative")
    b = _finite(b, "b")
    return np.sign(b) * np.maximum(np.abs(b) - threshold, 0.0)


# ---------------------------------------------------------------------------
# fusion (convex clustering) prox


class FusionProxResult(NamedTuple):
    value: np.ndarray
    dual: np.ndarray
    converged: bool
    iterations: int
    gap: float


@njit(cache=True)
def _fusion_dual(U, ei, ej, ec, radius, L, step, tol, max_iter):
    """Accelerated projected gradient on the fusion-prox dual, in place on ``L``.

    Returns ``(A, iterations, gap, converged)``.
    """
    m, d = U.shape
    E = ei.shape[0]
    Z = L.copy()
    L_new = np.empty_like(L)
    A = np.empty_like(U)
    t = 1.0
    gap = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # A = U - D'Z
        A[:, :] = U
        for e in range(E):
            a, b, c = ei[e], ej[e], ec[e]
            for q in range(d):
                A[a, q] -= Z[e, q]
                A[b, q] += c * Z[e, q]
        # L_new = proj(Z + step * D A);  restart test on <Z - L_new, L_new - L>
        restart = 0.0
        for e in range(E):
            a, b, c = ei[e], ej[e], ec[e]
            nrm = 0.0
            for q in range(d):
                v = Z[e, q] + step * (A[a, q] - c * A[b, q])
                L_new[e, q] = v
                nrm += v * v
            nrm = np.sqrt(nrm)
            if nrm > radius[e]:
                scale = radius[e] / nrm
                for q in range(d):
                    L_new[e, q] *= scale
            for q in range(d):
                restart += (Z[e, q] - L_new[e, q]) * (L_new[e, q] - L[e, q])
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if restart > 0.0:
            t_new = 1.0
            Z[:, :] = L_new
        else:
            mom = (t - 1.0) / t_new
            for e in range(E):
                for q in range(d):
                    Z[e, q] = L_new[e, q] + mom * (L_new[e, q] - L[e, q])
        L[:, :] = L_new
        t = t_new
        if it % 10 == 0 or it == max_iter:
            A[:, :] = U
            for e in range(E):
                a, b, c = ei[e], ej[e], ec[e]
                for q in range(d):
                    A[a, q] -= L[e, q]
                    A[b, q] += c * L[e, q]
            # primal - dual as a sum of nonnegative per-edge terms
            gap = 0.0
            for e in range(E):
                a, b, c = ei[e], ej[e], ec[e]
                nrm = 0.0
                inner = 0.0
                for q in range(d):
                    v = A[a, q] - c * A[b, q]
                    nrm += v * v
                    inner += v * L[e, q]
                gap += radius[e] * np.sqrt(nrm) - inner
            # ||A - A*|| <= sqrt(2 * gap) by strong convexity
            bound = tol * (1.0 + np.sqrt((A * A).sum()))
            if 2.0 * gap <= bound * bound:
                converged = True
                break
    A[:, :] = U
    for e in range(E):
        a, b, c = ei[e], ej[e], ec[e]
        for q in range(d):
            A[a, q] -= L[e, q]
            A[b, q] += c * L[e, q]
    return A, it, gap, converged


class _Fusion:
    """Dual projected-gradient solver for one axis' fusion prox.

    Works on items as rows of ``U`` (``m x d``).  Duals live on edges, one
    ``d``-vector per edge, each confined to a ball of radius ``nu * w_e``.
    """

    def __init__(self, edges: AxisEdges, m: int, cfg: ProxConfig):
        edges.check_bounds(m)
        self.edges = edges
        self.cfg = cfg
        if cfg.ama_step == "auto":
            # Gershgorin bound on ||D'D|| for a signed incidence matrix
            self.step = 1.0 / (2.0 * max(edges.max_degree(), 1))
        else:
            self.step = float(cfg.ama_step)

    def solve(self, U, nu, dual=None, tol=None) -> FusionProxResult:
        E = len(self.edges)
        d = U.shape[1]
        if E == 0 or nu == 0:
            return FusionProxResult(U.copy(), np.zeros((E, d)), True, 0, 0.0)
        radius = nu * self.edges.w
        if dual is None:
            L = np.zeros((E, d))
        else:
            L = np.array(dual, dtype=float)
            norms = np.sqrt((L * L).sum(axis=1))
            L *= np.minimum(1.0, radius / np.maximum(norms, 1e-300))[:, None]
        A, it, gap, ok = _fusion_dual(np.ascontiguousarray(U, dtype=float), self.edges.i,
                                      self.edges.j, self.edges.c, radius, L, self.step,
                                      tol or self.cfg.inner_tol, self.cfg.inner_max_iter)
        return FusionProxResult(A, L, bool(ok), int(it), float(gap))


def prox_fusion(M, edges: AxisEdges, nu: float, cfg: ProxConfig | None = None,
                axis: str = "columns", dual=None) -> FusionProxResult:
    """``argmin_A 0.5 ||A - M||_F^2 + nu * sum_e w_e ||A_i - c_e A_j||_2``.

    ``axis`` selects whether the edges join columns or rows of ``M``.  The
    returned ``dual`` can be passed back in to warm-start a nearby problem.
    """
    _check_axis(axis)
    if nu < 0:
        raise InputError("nu must be nonnegative")
    cfg = cfg or ProxConfig()
    M = _finite(M, "M")
    U = M.T if axis == "columns" else M
    res = _Fusion(edges, U.shape[0], cfg).solve(U, nu, dual)
    value = res.value.T if axis == "columns" else res.value
    return res._replace(value=value)


# ---------------------------------------------------------------------------
# COBRA


class CobraResult(NamedTuple):
    value: np.ndarray
    converged: bool
    iterations: int
    objective_trace: list
    duals: tuple


def cobra_objective(G, theta, edges: EdgeWeights, nu) -> float:
    D = np.asarray(G) - np.asarray(theta)
    return 0.5 * float((D * D).sum()) + nu * (
        fusion_penalty(G, edges.columns, "columns") + fusion_penalty(G, edges.rows, "rows"))


class Cobra:
    """Reusable COBRA solver for a fixed shape and edge set.

    Keeps the inner fusion duals and the Dykstra corrections between calls so
    that a sequence of nearby problems (as produced by an outer iteration)
    warm-starts cheaply.  The alternation is block coordinate descent on the
    dual over the two corrections, so any starting pair is valid; the primal
    start is ``theta - P - Q``.
    """

    def __init__(self, shape, edges: EdgeWeights, cfg: ProxConfig | None = None,
                 max_sweeps: int | None = None):
        self.cfg = cfg or ProxConfig()
        self.shape = tuple(shape)
        p, k = self.shape
        self.edges = edges
        self._col = _Fusion(edges.columns, k, self.cfg)
        self._row = _Fusion(edges.rows, p, self.cfg)
        self.max_sweeps = max_sweeps or self.cfg.inner_max_iter
        self.duals = (None, None)
        self._corrections = None

    def __call__(self, theta, nu, tol: float | None = None) -> CobraResult:
        """Solve for one ``theta``; ``tol`` overrides ``cfg.inner_tol`` for this call."""
        tol = tol or self.cfg.inner_tol
        theta = _finite(theta, "theta")
        if theta.shape != self.shape:
            raise InputError(f"theta has shape {theta.shape}, expected {self.shape}")
        if nu < 0:
            raise InputError("nu must be nonnegative")
        has_col, has_row = len(self.edges.columns) > 0, len(self.edges.rows) > 0
        if nu == 0 or not (has_col or has_row):
            return CobraResult(theta.copy(), True, 0, [cobra_objective(theta, theta, self.edges, 0)],
                               self.duals)
        dcol, drow = self.duals
        if not (has_col and has_row):
            # a single fusion prox; the alternation would be a no-op
            if has_col:
                r = self._col.solve(theta.T, nu, dcol, tol)
                G, dcol = r.value.T, r.dual
            else:
                r = self._row.solve(theta, nu, drow, tol)
                G, drow = r.value, r.dual
            self.duals = (dcol, drow)
            return CobraResult(G, r.converged, 1,
                               [cobra_objective(G, theta, self.edges, nu)], self.duals)

        if self._corrections is None:
            P, Q = np.zeros_like(theta), np.zeros_like(theta)
        else:
            # corrections are subgradients scaled by nu
            P, Q, nu_prev = self._corrections
            P, Q = P * (nu / nu_prev), Q * (nu / nu_prev)
        G = theta - P - Q
        trace = []
        inner_ok = True
        converged = False
        sweep = 0
        for sweep in range(1, self.max_sweeps + 1):
            r = self._row.solve(G + P, nu, drow, tol)
            Yr, drow = r.value, r.dual
            inner_ok &= r.converged
            P = G + P - Yr
            c = self._col.solve((Yr + Q).T, nu, dcol, tol)
            G_new, dcol = c.value.T, c.dual
            inner_ok &= c.converged
            Q = Yr + Q - G_new
            trace.append(cobra_objective(G_new, theta, self.edges, nu))
            change = np.linalg.norm(G_new - G) / (1.0 + np.linalg.norm(G))
            G = G_new
            if change < tol:
                converged = True
                break
        self.duals = (dcol, drow)
        self._corrections = (P, Q, nu)
        return CobraResult(G, converged and inner_ok, sweep, trace, self.duals)


def cobra(theta, edges: EdgeWeights, nu: float, cfg: ProxConfig | None = None) -> CobraResult:
    """Prox of ``nu * (column fusion + row fusion)`` by Dykstra-style alternation.

    Alternates the row-fusion prox and the column-fusion prox with correction
    matrices ``P`` and ``Q``; returns the minimiser of
    ``0.5 ||G - theta||_F^2 + nu * (Omega_W(G) + Omega_W~(G'))``.
    """
    theta = _finite(theta, "theta")
    return Cobra(theta.shape, edges, cfg)(theta, nu)
