"""Solution paths, validation-RMSE tuning and the two-step Lasso+COBRA baseline.

Selection is greedy: ``lambda1`` first by plain Lasso, then the fusion
multipliers with ``lambda1`` held fixed.  Grid points are swept in
increasing order with warm starts; ties in validation score go to the
smaller penalty.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .formulation1 import fit_formulation1
from .formulation2 import fit_formulation2
from .lasso import lasso_path_max, lasso_tasks
from .metrics import prediction_rmse
from .model import EdgeWeights, FitResult, Hyperparameters, TaskDataset
from .prox import Cobra, ProxConfig
from .selection import (ClusterAssignment, cluster_thresholds, estimate_sigma,
                        extract_clusters)
from .weights import build_weights

log = logging.getLogger(__name__)

PATHS = ("lambda2-f1", "lambda3-f2")
MODES = ("bicluster", "columns-only", "rows-only")


def _check_mode(mode):
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}, got {mode!r}")


def fit_model(data: TaskDataset, edges: EdgeWeights, hp: Hyperparameters, formulation: int = 1,
              cfg: ProxConfig | None = None, init=None) -> FitResult:
    """Dispatch to :func:`fit_formulation1` or :func:`fit_formulation2`."""
    if formulation == 1:
        return fit_formulation1(data, edges, hp, cfg, init)
    if formulation == 2:
        return fit_formulation2(data, edges, hp, cfg, init)
    raise InputError(f"formulation must be 1 or 2, got {formulation!r}")


@dataclass
class ClusterReport:
    assignment: ClusterAssignment
    sigma: float
    tau_r: float
    tau_c: float


def assign_clusters(data: TaskDataset, theta, clustered=None,
                    mode: str = "bicluster") -> ClusterReport:
    """Thresholded cluster extraction for a fitted model.

    ``sigma`` comes from the residuals of ``theta``; the thresholds and the
    grouping use ``clustered`` (``Gamma`` for Formulation 2, defaults to
    ``theta``).  An axis excluded by ``mode`` gets singleton labels.
    """
    _check_mode(mode)
    M = np.asarray(theta if clustered is None else clustered, dtype=float)
    sigma = estimate_sigma(data, theta)
    tau_r, tau_c = cluster_thresholds(M, sigma, data.n, data.p)
    a = extract_clusters(M, tau_r, tau_c)
    if mode == "columns-only":
        a = ClusterAssignment(np.arange(M.shape[0]), a.col_labels)
        tau_r = 0.0
    elif mode == "rows-only":
        a = ClusterAssignment(a.row_labels, np.arange(M.shape[1]))
        tau_c = 0.0
    return ClusterReport(a, sigma, tau_r, tau_c)


def pilot_edges(data: TaskDataset, lambda1: float, hp: Hyperparameters, mode: str = "bicluster"):
    """Lasso pilot at ``lambda1`` and the fusion weights built from it."""
    pilot = lasso_tasks(data, lambda1).coef
    return pilot, build_weights(pilot, data.n, hp.kappa, hp.phi, mode)


# ----------------------------------------------------------------------------
# solution paths


@dataclass
class PathPoint:
    penalty: float
    theta: np.ndarray
    gamma: np.ndarray | None
    assignment: ClusterAssignment
    objective: float
    iterations: int
    converged: bool

    @property
    def n_row_clusters(self) -> int:
        return self.assignment.n_row_clusters

    @property
    def n_col_clusters(self) -> int:
        return self.assignment.n_col_clusters


@dataclass
class SolutionPath:
    which: str
    points: list[PathPoint] = field(default_factory=list)

    @property
    def penalties(self) -> np.ndarray:
        return np.array([pt.penalty for pt in self.points])

    @property
    def col_counts(self) -> np.ndarray:
        return np.array([pt.n_col_clusters for pt in self.points])

    @property
    def row_counts(self) -> np.ndarray:
        return np.array([pt.n_row_clusters for pt in self.points])


def _check_grid(grid, name="grid", positive=False) -> np.ndarray:
    g = np.asarray(grid, dtype=float).ravel()
    if g.size == 0:
        raise InputError(f"{name} is empty")
    if not np.isfinite(g).all() or np.any(g < 0) or (positive and np.any(g <= 0)):
        raise InputError(f"{name} values must be finite and {'positive' if positive else 'nonnegative'}")
    return g


def solution_path(data: TaskDataset, edges: EdgeWeights, grid, which: str = "lambda2-f1",
                  hp: Hyperparameters | None = None, cfg: ProxConfig | None = None,
                  mode: str = "bicluster") -> SolutionPath:
    """Fit along a strictly increasing grid of ``lambda2`` (Formulation 1) or
    ``lambda3`` (Formulation 2), each fit warm-started from the previous one.

    Other multipliers come from ``hp``.  Non-converged fits are kept with
    their flag.
    """
    if which not in PATHS:
        raise InputError(f"which must be one of {PATHS}, got {which!r}")
    hp = hp or Hyperparameters()
    g = _check_grid(grid)
    if np.any(np.diff(g) <= 0):
        raise InputError("path grid must be strictly increasing")
    edges = edges.restrict(mode)
    path = SolutionPath(which)
    init = None
    for value in g:
        if which == "lambda2-f1":
            h = hp.replace(lambda2=float(value))
            fit = fit_formulation1(data, edges, h, cfg, init)
            init = fit.info["aux"]
        else:
            h = hp.replace(lambda3=float(value))
            fit = fit_formulation2(data, edges, h, cfg, init)
            init = (fit.theta, fit.gamma)
        rep = assign_clusters(data, fit.theta, fit.clustered, mode)
        path.points.append(PathPoint(float(value), fit.theta, fit.gamma, rep.assignment,
                                     fit.objective_trace[-1], fit.iterations, fit.converged))
    return path


# ----------------------------------------------------------------------------
# validation splits


@dataclass(frozen=True)
class Split:
    """How training data are divided for validation.

    ``holdout`` shuffles the samples into train / validation / test parts
    (70/15/15 by default); the test part is never used for tuning.
    ``kfold`` rotates ``folds`` near-equal validation folds.
    """

    kind: str = "holdout"
    train_fraction: float = 0.70
    validation_fraction: float = 0.15
    folds: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("holdout", "kfold"):
            raise InputError(f"split kind must be 'holdout' or 'kfold', got {self.kind!r}")
        if not (0 < self.train_fraction < 1 and 0 < self.validation_fraction < 1
                and self.train_fraction + self.validation_fraction <= 1):
            raise InputError("split fractions must be positive and sum to at most 1")
        if self.folds < 2:
            raise InputError("kfold needs at least 2 folds")

    def _perm(self, n):
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed))).permutation(n)

    def _holdout_sizes(self, n):
        n_train = int(round(self.train_fraction * n))
        n_val = int(round(self.validation_fraction * n))
        if n_train < 1 or n_val < 1:
            raise InputError(f"holdout split of n={n} leaves an empty part")
        return n_train, min(n_val, n - n_train)

    def partitions(self, n: int) -> list[tuple[np.ndarray, np.ndarray]]:
        """``(train, validation)`` index pairs."""
        perm = self._perm(n)
        if self.kind == "holdout":
            n_train, n_val = self._holdout_sizes(n)
            return [(np.sort(perm[:n_train]), np.sort(perm[n_train:n_train + n_val]))]
        if self.folds > n:
            raise InputError(f"{self.folds} folds need at least {self.folds} samples, got {n}")
        parts = np.array_split(perm, self.folds)
        out = []
        for f in range(self.folds):
            train = np.sort(np.concatenate([parts[g] for g in range(self.folds) if g != f]))
            out.append((train, np.sort(parts[f])))
        return out

    def test_indices(self, n: int) -> np.ndarray:
        """Held-out test samples of a ``holdout`` split (empty for ``kfold``)."""
        if self.kind != "holdout":
            return np.zeros(0, dtype=int)
        n_train, n_val = self._holdout_sizes(n)
        return np.sort(self._perm(n)[n_train + n_val:])


def _folds(data, split, validation):
    if validation is not None:
        if validation.p != data.p or validation.k != data.k or validation.shared != data.shared:
            raise InputError("validation data must match the training dimensions")
        return [(data, validation)]
    return [(data.subset(tr), data.subset(va)) for tr, va in split.partitions(data.n)]


def _pick(scores: np.ndarray) -> int:
    """Index of the smallest mean score; the first (smallest penalty) wins ties."""
    return int(np.flatnonzero(scores == scores.min())[0])


def _map(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# ----------------------------------------------------------------------------
# default grids


def default_grids(data: TaskDataset, formulation: int = 1, size: int = 13) -> dict:
    """Log-spaced grids scaled by the smallest all-zero Lasso penalty.

    ``lambda1`` spans ``[1e-3, 1] * lmax``; the fusion grids span the range
    from negligible to complete fusion seen on standardised designs.
    """
    if data.shared:
        lmax = lasso_path_max(data.designs, data.responses)
    else:
        lmax = max(lasso_path_max(data.design(s), data.responses[:, s]) for s in range(data.k))
    lmax = lmax if lmax > 0 else 1.0
    grids = {"lambda1": lmax * np.geomspace(1e-3, 1.0, size)}
    if formulation == 1:
        grids["lambda2"] = lmax * np.geomspace(1e-2, 1e2, size)
    else:
        grids["lambda2"] = lmax * np.array([0.03, 0.3, 3.0])
        grids["lambda3"] = lmax * np.geomspace(1e-2, 1e2, 9)
    return grids


# ----------------------------------------------------------------------------
# cross-validation


@dataclass
class CVResult:
    hyperparameters: Hyperparameters
    lambda1_grid: np.ndarray
    lambda1_scores: np.ndarray
    fusion_grid: list[tuple[float, ...]]
    fusion_scores: np.ndarray

    def to_dict(self) -> dict:
        return {"hyperparameters": self.hyperparameters.to_dict(),
                "lambda1": {"grid": self.lambda1_grid.tolist(),
                            "rmse": self.lambda1_scores.tolist()},
                "fusion": {"grid": [list(g) for g in self.fusion_grid],
                           "rmse": self.fusion_scores.tolist()}}


def _lasso_scores(pair, grid):
    train, val = pair
    out = np.empty(len(grid))
    coef = None
    for idx in range(len(grid) - 1, -1, -1):
        coef = lasso_tasks(train, grid[idx], coef).coef
        out[idx] = prediction_rmse(val, coef)
    return out


def _fusion_scores(pair, formulation, hp, l2_grid, l3_grid, edges, mode, cfg):
    train, val = pair
    pilot, e = pilot_edges(train, hp.lambda1, hp, mode)
    e = e if edges is None else edges.restrict(mode)
    scores = []
    if formulation == 1:
        init = pilot
        for l2 in l2_grid:
            fit = fit_formulation1(train, e, hp.replace(lambda2=l2), cfg, init)
            init = fit.info["aux"]
            scores.append(prediction_rmse(val, fit.theta))
    else:
        for l2 in l2_grid:
            init = (pilot, pilot)
            for l3 in l3_grid:
                fit = fit_formulation2(train, e, hp.replace(lambda2=l2, lambda3=l3), cfg, init)
                init = (fit.theta, fit.gamma)
                scores.append(prediction_rmse(val, fit.gamma))
    return np.array(scores)


def cross_validate(data: TaskDataset, grids: dict, formulation: int = 1,
                   split: Split | None = None, edges: EdgeWeights | None = None,
                   hp: Hyperparameters | None = None, cfg: ProxConfig | None = None,
                   mode: str = "bicluster", validation: TaskDataset | None = None,
                   threads: int = 1) -> CVResult:
    """Greedy two-stage selection by validation RMSE.

    Stage 1 picks ``lambda1`` for the plain per-task Lasso.  Stage 2 fixes it
    and searches ``lambda2`` (Formulation 1) or the ``lambda2 x lambda3``
    product grid (Formulation 2, scored with the predictions ``X Gamma``).

    Parameters
    ----------
    grids : dict
        ``lambda1``, ``lambda2`` and, for Formulation 2, ``lambda3`` values.
        A missing or single-valued ``lambda1`` grid skips stage 1.
    split : Split, optional
        Ignored when an explicit ``validation`` dataset is given.
    edges : EdgeWeights, optional
        Fixed fusion weights.  By default weights are rebuilt on every
        training part from its Lasso pilot at the selected ``lambda1``.
    threads : int
        Folds are evaluated concurrently when greater than 1.
    """
    if formulation not in (1, 2):
        raise InputError(f"formulation must be 1 or 2, got {formulation!r}")
    _check_mode(mode)
    hp = hp or Hyperparameters()
    split = split or Split()
    l1_grid = np.sort(_check_grid(grids.get("lambda1", [hp.lambda1]), "lambda1 grid"))
    l2_grid = np.sort(_check_grid(grids.get("lambda2", []), "lambda2 grid",
                                  positive=formulation == 2))
    l3_grid = None
    if formulation == 2:
        l3_grid = np.sort(_check_grid(grids.get("lambda3", []), "lambda3 grid"))
    pairs = _folds(data, split, validation)

    if len(l1_grid) > 1:
        l1_scores = np.mean(_map(lambda pr: _lasso_scores(pr, l1_grid), pairs, threads), axis=0)
    else:
        l1_scores = np.full(1, np.nan)
    lambda1 = float(l1_grid[_pick(l1_scores)]) if len(l1_grid) > 1 else float(l1_grid[0])
    hp = hp.replace(lambda1=lambda1)
    log.info("selected lambda1=%g", lambda1)

    if formulation == 1:
        points = [(float(v),) for v in l2_grid]
    else:
        points = [(float(a), float(b)) for a in l2_grid for b in l3_grid]
    if len(points) > 1:
        fn = lambda pr: _fusion_scores(pr, formulation, hp, l2_grid, l3_grid, edges, mode, cfg)  # noqa: E731
        f_scores = np.mean(_map(fn, pairs, threads), axis=0)
        best = points[_pick(f_scores)]
    else:
        f_scores = np.full(1, np.nan)
        best = points[0]
    hp = hp.replace(lambda2=best[0]) if formulation == 1 else hp.replace(lambda2=best[0],
                                                                         lambda3=best[1])
    return CVResult(hp, l1_grid, l1_scores, points, f_scores)


# ----------------------------------------------------------------------------
# two-step baseline


@dataclass
class BaselineResult:
    lasso: np.ndarray
    gamma: np.ndarray
    nu: float
    lambda1: float
    report: ClusterReport
    nu_grid: np.ndarray
    nu_scores: np.ndarray


def default_nu_grid(theta_hat, n: int, size: int = 13) -> np.ndarray:
    """COBRA strengths from almost none to complete fusion of ``theta_hat``."""
    scale = np.linalg.norm(theta_hat) * np.sqrt(n)
    return (scale if scale > 0 else 1.0) * np.geomspace(1e-3, 10.0, size)


def baseline_two_step(data: TaskDataset, lambda1: float, nu_grid=None,
                      validation: TaskDataset | None = None, split: Split | None = None,
                      hp: Hyperparameters | None = None, cfg: ProxConfig | None = None,
                      mode: str = "bicluster") -> BaselineResult:
    """Per-task Lasso, then convex bi-clustering of the estimate.

    The COBRA strength ``nu`` is chosen by validation RMSE of ``X Gamma``
    (on ``validation`` if given, else on the ``split``); the final ``Gamma``
    is recomputed from the Lasso on all of ``data``.
    """
    _check_mode(mode)
    hp = hp or Hyperparameters()
    cfg = cfg or ProxConfig()
    theta, edges = pilot_edges(data, lambda1, hp, mode)
    grid = default_nu_grid(theta, data.n) if nu_grid is None else np.sort(_check_grid(nu_grid, "nu grid"))

    def gammas(th, e):
        solver = Cobra(th.shape, e, cfg)
        return [solver(th, nu).value for nu in grid]

    if len(grid) > 1:
        if validation is not None:
            pairs = [(None, validation)]
            fold_fits = [(theta, edges)]
        else:
            pairs = _folds(data, split or Split(), None)
            fold_fits = [pilot_edges(tr, lambda1, hp, mode) for tr, _ in pairs]
        scores = np.mean([[prediction_rmse(va, G) for G in gammas(th, e)]
                          for (_, va), (th, e) in zip(pairs, fold_fits)], axis=0)
        nu = float(grid[_pick(scores)])
    else:
        scores = np.full(1, np.nan)
        nu = float(grid[0])
    gamma = Cobra(theta.shape, edges, cfg)(theta, nu).value
    report = assign_clusters(data, theta, gamma, mode)
    return BaselineResult(theta, gamma, nu, lambda1, report, grid, scores)
