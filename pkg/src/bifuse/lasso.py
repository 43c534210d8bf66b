"""Cyclic coordinate-descent Lasso for ``||y - X b||^2 + lambda1 * ||b||_1``.

A 2-D ``y`` is treated as a batch of independent problems sharing ``X``;
coordinates are updated for all of them at once.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InputError


class LassoResult(NamedTuple):
    coef: np.ndarray
    kkt: float
    converged: bool
    sweeps: int


def kkt_violation(grad, coef, lambda1) -> float:
    """Largest violation of the Lasso subgradient conditions.

    ``grad`` is the gradient of the smooth part at ``coef``.
    """
    active = coef != 0
    viol = np.where(active, np.abs(grad + lambda1 * np.sign(coef)),
                    np.maximum(np.abs(grad) - lambda1, 0.0))
    return float(viol.max()) if viol.size else 0.0


def _soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def cd_gram(G, C, lambda1, B0=None, tol=1e-6, max_sweeps=100000) -> LassoResult:
    """Covariance-update coordinate descent.

    Minimises ``b'Gb - 2 c'b + lambda1 ||b||_1`` for every column ``c`` of
    ``C`` (that is the Lasso with ``G = X'X`` and ``C = X'Y``).
    """
    G = np.asarray(G, dtype=float)
    C = np.asarray(C, dtype=float)
    p = G.shape[0]
    B = np.zeros_like(C) if B0 is None else np.array(B0, dtype=float)
    diag = np.diag(G).copy()
    half = 0.5 * lambda1
    R = C - G @ B
    kkt = np.inf
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        for j in range(p):
            if diag[j] <= 0:
                continue
            bj = B[j]
            new = _soft(R[j] + diag[j] * bj, half) / diag[j]
            delta = new - bj
            if np.any(delta):
                R -= np.outer(G[:, j], delta)
                B[j] = new
        R = C - G @ B
        kkt = kkt_violation(-2.0 * R, B, lambda1)
        if kkt < tol:
            return LassoResult(B, kkt, True, sweep)
    return LassoResult(B, kkt, False, sweep)


def cd_naive(X, Y, lambda1, B0=None, tol=1e-6, max_sweeps=100000) -> LassoResult:
    """Residual-update coordinate descent, preferred when ``n <= p``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    p = X.shape[1]
    B = np.zeros((p, Y.shape[1])) if B0 is None else np.array(B0, dtype=float)
    sq = (X * X).sum(axis=0)
    half = 0.5 * lambda1
    R = Y - X @ B
    kkt = np.inf
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        for j in range(p):
            if sq[j] <= 0:
                continue
            xj = X[:, j]
            bj = B[j]
            new = _soft(xj @ R + sq[j] * bj, half) / sq[j]
            delta = new - bj
            if np.any(delta):
                R -= np.outer(xj, delta)
                B[j] = new
        R = Y - X @ B
        kkt = kkt_violation(-2.0 * (X.T @ R), B, lambda1)
        if kkt < tol:
            return LassoResult(B, kkt, True, sweep)
    return LassoResult(B, kkt, False, sweep)


def lasso_cd(X, y, lambda1: float, coef0=None, tol: float = 1e-6,
             max_sweeps: int = 100000) -> LassoResult:
    """Lasso by cyclic coordinate descent, run until the KKT residual is below ``tol``.

    Parameters
    ----------
    X : (n, p) array
    y : (n,) or (n, T) array
        A matrix is solved column by column (all columns share ``X``).
    lambda1 : float
        Penalty on the unscaled objective ``||y - Xb||^2 + lambda1 ||b||_1``.
    coef0 : array, optional
        Warm start with the shape of the returned coefficients.

    Returns
    -------
    LassoResult
        ``coef`` has shape ``(p,)`` or ``(p, T)``; ``kkt`` is the final
        maximum subgradient violation and ``converged`` whether it fell below
        ``tol`` within ``max_sweeps``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape[0] != X.shape[0] or y.ndim not in (1, 2):
        raise InputError("X must be n x p and y must have n rows")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise InputError("non-finite input")
    if lambda1 < 0:
        raise InputError("lambda1 must be nonnegative")
    vector = y.ndim == 1
    Y = y[:, None] if vector else y
    B0 = None
    if coef0 is not None:
        B0 = np.asarray(coef0, dtype=float).reshape(X.shape[1], Y.shape[1])
    n, p = X.shape
    if n > p:
        res = cd_gram(X.T @ X, X.T @ Y, lambda1, B0, tol, max_sweeps)
    else:
        res = cd_naive(X, Y, lambda1, B0, tol, max_sweeps)
    if vector:
        res = res._replace(coef=res.coef[:, 0])
    return res


def lasso_path_max(X, y) -> float:
    """Smallest ``lambda1`` at which the Lasso solution is identically zero."""
    X = np.asarray(X, dtype=float)
    return float(2.0 * np.abs(X.T @ np.asarray(y, dtype=float)).max())


def augment_task(X, y, gamma_col, lambda2: float):
    """Stack ``(X; sqrt(lambda2) I)`` and ``(y; sqrt(lambda2) gamma_col)``.

    The Lasso on the stacked system equals
    ``||y - Xb||^2 + lambda2 ||b - gamma_col||^2 + lambda1 ||b||_1``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    g = np.asarray(gamma_col, dtype=float)
    if not lambda2 > 0:
        raise InputError("lambda2 must be positive")
    n, p = X.shape
    if y.shape[0] != n or g.shape[0] != p:
        raise InputError("dimension mismatch between X, y and gamma_col")
    root = np.sqrt(lambda2)
    X_aug = np.vstack([X, root * np.eye(p)])
    y_aug = np.concatenate([y, root * g]) if y.ndim == 1 else np.vstack([y, root * g])
    return X_aug, y_aug


def lasso_tasks(data, lambda1: float, coef0=None, tol: float = 1e-6) -> LassoResult:
    """Independent Lasso fit for every task of a ``TaskDataset``."""
    if data.shared:
        return lasso_cd(data.designs, data.responses, lambda1, coef0, tol)
    cols, kkts, ok, sweeps = [], [], True, 0
    for s in range(data.k):
        b0 = None if coef0 is None else np.asarray(coef0)[:, s]
        r = lasso_cd(data.design(s), data.responses[:, s], lambda1, b0, tol)
        cols.append(r.coef)
        kkts.append(r.kkt)
        ok &= r.converged
        sweeps = max(sweeps, r.sweeps)
    return LassoResult(np.column_stack(cols), max(kkts), ok, sweeps)
