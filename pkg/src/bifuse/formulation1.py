"""Formulation 1: fused bi-clustering penalty directly on the coefficients.

Minimises ``||Y - X Theta||_F^2 + lambda1 ||Theta||_1
+ lambda2 (Omega_W(Theta) + Omega_W~(Theta'))`` by parallel proximal
decomposition over the three terms.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import InputError, NumericalDivergenceError
from .lasso import lasso_tasks
from .model import EdgeWeights, FitResult, Hyperparameters, TaskDataset, objective_f1
from .prox import Cobra, ProxConfig, RidgeProx

log = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 5000


def default_step(data: TaskDataset) -> float:
    """``1 / (2 lambda_max(X'X))``: the inverse Lipschitz constant of the loss gradient."""
    Xs = [data.designs] if data.shared else data.designs
    top = max(np.linalg.eigvalsh(X.T @ X)[-1] for X in Xs)
    return 1.0 / (2.0 * top) if top > 0 else 1.0


def _check_finite(x, source):
    if not np.isfinite(x).all():
        raise NumericalDivergenceError(f"non-finite iterate from {source}", source)


def fit_formulation1(data: TaskDataset, edges: EdgeWeights, hp: Hyperparameters,
                     cfg: ProxConfig | None = None, init=None) -> FitResult:
    """Fit Formulation 1.

    Parameters
    ----------
    data, edges, hp
        Dataset, normalised fusion weights and hyperparameters (``lambda1``,
        ``lambda2``, ``gamma``, ``tol``, ``max_iter`` are used).  With
        ``gamma=None`` the step is :func:`default_step`.
    cfg : ProxConfig, optional
        Controls for the inner COBRA step.  Each COBRA call is solved to
        ``max(inner_tol, 0.1 * previous outer change)`` (capped at 1e-2), so
        early iterations are cheap and late ones are as accurate as configured.
    init : array or sequence of three arrays, optional
        Starting point(s) for the three auxiliary variables.  Defaults to the
        per-task Lasso estimate at ``lambda1``.

    Returns
    -------
    FitResult
        ``theta`` is the last averaged prox point; ``objective_trace`` holds
        the objective after every iteration.
    """
    cfg = cfg or ProxConfig()
    p, k = data.p, data.k
    edges.columns.check_bounds(k)
    edges.rows.check_bounds(p)
    if init is None:
        init = lasso_tasks(data, hp.lambda1).coef
    if isinstance(init, (list, tuple)):
        if len(init) != 3:
            raise InputError("init must be one matrix or three matrices")
        aux = [data.check_theta(a, "init").copy() for a in init]
    else:
        aux = [data.check_theta(init, "init").copy() for _ in range(3)]

    g = hp.gamma if hp.gamma is not None else default_step(data)
    ridge = RidgeProx(data, g)
    cobra = Cobra((p, k), edges, cfg)
    nu = g * hp.lambda2
    l1_threshold = g * hp.lambda1
    max_iter = hp.max_iter or DEFAULT_MAX_ITER

    theta_hat = (aux[0] + aux[1] + aux[2]) / 3.0
    trace = []
    converged = False
    inner_ok = True
    it = 0
    change = np.inf
    for it in range(1, max_iter + 1):
        p1 = ridge(aux[0])
        _check_finite(p1, "prox_ridge")
        p2 = np.sign(aux[1]) * np.maximum(np.abs(aux[1]) - l1_threshold, 0.0)
        _check_finite(p2, "prox_l1")
        # inexact prox: solve only as accurately as the outer iterate is moving
        c = cobra(aux[2], nu, max(cfg.inner_tol, min(1e-2, 0.1 * change)))
        p3 = c.value
        inner_ok &= c.converged
        _check_finite(p3, "cobra")
        p_bar = (p1 + p2 + p3) / 3.0
        for a, pi in zip(aux, (p1, p2, p3)):
            a += 2.0 * p_bar - theta_hat - pi
        change = np.linalg.norm(p_bar - theta_hat) / (1.0 + np.linalg.norm(theta_hat))
        theta_hat = p_bar
        trace.append(objective_f1(data, theta_hat, edges, hp))
        if change < hp.tol:
            converged = True
            break
    if not converged:
        log.warning("formulation 1 stopped after %d iterations without converging", it)
    return FitResult(theta=theta_hat, objective_trace=trace, iterations=it,
                     converged=converged, info={"inner_converged": bool(inner_ok),
                                                "gamma": g, "aux": aux})
