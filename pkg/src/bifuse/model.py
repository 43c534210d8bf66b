"""Shared domain types and the two objective functions.

Matrices follow the regression convention: ``theta`` is ``p x k`` with one
column per task and one row per feature.  Column fusion acts across tasks,
row fusion across features.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InputError

AXES = ("columns", "rows")


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _check_axis(axis):
    if axis not in AXES:
        raise InputError(f"axis must be one of {AXES}, got {axis!r}")


@dataclass(frozen=True, eq=False)
class TaskDataset:
    """Designs and responses for ``k`` linear regression tasks.

    ``designs`` is either one ``n x p`` matrix shared by every task or a
    sequence of ``k`` such matrices.  ``responses`` is ``n x k``.
    """

    designs: np.ndarray | tuple[np.ndarray, ...]
    responses: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.responses, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.ndim != 2:
            raise InputError("responses must be a 2-D n x k matrix")
        if isinstance(self.designs, (list, tuple)):
            Xs = tuple(_frozen(X) for X in self.designs)
            if len(Xs) != Y.shape[1]:
                raise InputError(
                    f"got {len(Xs)} design matrices for {Y.shape[1]} tasks")
            shapes = {X.shape for X in Xs}
            if len(shapes) != 1 or Xs[0].ndim != 2:
                raise InputError("per-task designs must all be n x p matrices")
            designs = Xs
            n, p = Xs[0].shape
        else:
            X = _frozen(self.designs)
            if X.ndim != 2:
                raise InputError("design must be a 2-D n x p matrix")
            designs = X
            n, p = X.shape
        if Y.shape[0] != n:
            raise InputError(
                f"design has {n} rows but responses have {Y.shape[0]}")
        if n < 1 or p < 1 or Y.shape[1] < 1:
            raise InputError("n, p and k must all be at least 1")
        Xall = designs if isinstance(designs, tuple) else (designs,)
        if not all(np.isfinite(X).all() for X in Xall) or not np.isfinite(Y).all():
            raise InputError("dataset contains non-finite entries")
        object.__setattr__(self, "designs", designs)
        object.__setattr__(self, "responses", _frozen(Y))

    @classmethod
    def per_task(cls, designs: Sequence[np.ndarray], responses) -> TaskDataset:
        return cls(tuple(designs), responses)

    @property
    def shared(self) -> bool:
        return not isinstance(self.designs, tuple)

    @property
    def n(self) -> int:
        return self.responses.shape[0]

    @property
    def p(self) -> int:
        X = self.designs if self.shared else self.designs[0]
        return X.shape[1]

    @property
    def k(self) -> int:
        return self.responses.shape[1]

    def design(self, s: int) -> np.ndarray:
        return self.designs if self.shared else self.designs[s]

    def predict(self, theta) -> np.ndarray:
        theta = self.check_theta(theta)
        if self.shared:
            return self.designs @ theta
        return np.column_stack([X @ theta[:, s] for s, X in enumerate(self.designs)])

    def residuals(self, theta) -> np.ndarray:
        return self.responses - self.predict(theta)

    def subset(self, rows) -> TaskDataset:
        """Dataset restricted to the given sample indices."""
        rows = np.asarray(rows)
        if self.shared:
            return TaskDataset(self.designs[rows], self.responses[rows])
        return TaskDataset(tuple(X[rows] for X in self.designs), self.responses[rows])

    def check_theta(self, theta, name="theta") -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.p, self.k):
            raise InputError(
                f"{name} has shape {theta.shape}, expected ({self.p}, {self.k})")
        return theta


@dataclass(frozen=True, eq=False)
class AxisEdges:
    """Weighted, optionally signed, edges between the items of one axis.

    Each edge ``(i, j, w, c)`` with ``i < j`` contributes
    ``w * ||item_i - c * item_j||_2`` to the fusion penalty.  Zero-weight
    edges are dropped on construction.
    """

    i: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    j: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    w: np.ndarray = field(default_factory=lambda: np.zeros(0))
    c: np.ndarray | None = None

    def __post_init__(self):
        i = np.asarray(self.i, dtype=np.int64).ravel()
        j = np.asarray(self.j, dtype=np.int64).ravel()
        w = np.asarray(self.w, dtype=float).ravel()
        c = np.ones_like(w) if self.c is None else np.asarray(self.c, dtype=float).ravel()
        if not (len(i) == len(j) == len(w) == len(c)):
            raise InputError("edge arrays must have equal length")
        if np.any(i < 0) or np.any(i >= j):
            raise InputError("edges must satisfy 0 <= i < j")
        if not np.isfinite(w).all() or np.any(w < 0):
            raise InputError("edge weights must be finite and nonnegative")
        if not np.all(np.isin(c, (-1.0, 1.0))):
            raise InputError("edge signs must be -1 or +1")
        if len(set(zip(i.tolist(), j.tolist()))) != len(i):
            raise InputError("duplicate edge")
        keep = w > 0
        object.__setattr__(self, "i", _frozen(i[keep], np.int64))
        object.__setattr__(self, "j", _frozen(j[keep], np.int64))
        object.__setattr__(self, "w", _frozen(w[keep]))
        object.__setattr__(self, "c", _frozen(c[keep]))

    @classmethod
    def from_list(cls, edges) -> AxisEdges:
        """Build from ``(i, j, w)`` or ``(i, j, w, c)`` tuples."""
        edges = [tuple(e) for e in edges]
        if not edges:
            return cls()
        cols = list(zip(*[e if len(e) == 4 else (*e, 1.0) for e in edges]))
        return cls(cols[0], cols[1], cols[2], cols[3])

    def to_list(self) -> list[tuple[int, int, float, int]]:
        return [(int(a), int(b), float(w), int(c))
                for a, b, w, c in zip(self.i, self.j, self.w, self.c)]

    def __len__(self):
        return len(self.w)

    @property
    def total(self) -> float:
        return float(self.w.sum())

    def check_bounds(self, size: int):
        if len(self) and int(self.j.max()) >= size:
            raise InputError(
                f"edge index {int(self.j.max())} out of bounds for axis of size {size}")

    def max_degree(self) -> int:
        if not len(self):
            return 0
        return int(np.bincount(np.concatenate([self.i, self.j])).max())


@dataclass(frozen=True, eq=False)
class EdgeWeights:
    """Column (task) and row (feature) fusion graphs."""

    columns: AxisEdges = field(default_factory=AxisEdges)
    rows: AxisEdges = field(default_factory=AxisEdges)

    def axis(self, axis: str) -> AxisEdges:
        _check_axis(axis)
        return self.columns if axis == "columns" else self.rows

    def restrict(self, mode: str) -> EdgeWeights:
        """Drop one axis for uni-clustering (``columns-only``/``rows-only``)."""
        if mode == "bicluster":
            return self
        if mode == "columns-only":
            return EdgeWeights(self.columns, AxisEdges())
        if mode == "rows-only":
            return EdgeWeights(AxisEdges(), self.rows)
        raise InputError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class Hyperparameters:
    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda3: float = 0.0
    phi: float = 20.0
    kappa: int = 5
    gamma: float | None = None
    tol: float = 1e-6
    max_iter: int | None = None

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "phi"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InputError(f"{name} must be finite and nonnegative, got {v}")
        if self.kappa < 1:
            raise InputError("kappa must be a positive integer")
        if self.gamma is not None and not self.gamma > 0:
            raise InputError("gamma must be positive (or None for the data-scaled default)")
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise InputError("max_iter must be positive")

    def replace(self, **changes) -> Hyperparameters:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FitResult:
    theta: np.ndarray
    gamma: np.ndarray | None = None
    objective_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    info: dict = field(default_factory=dict)

    @property
    def clustered(self) -> np.ndarray:
        """Matrix whose rows/columns carry the cluster structure."""
        return self.theta if self.gamma is None else self.gamma

    @property
    def task_specific(self) -> np.ndarray | None:
        """``theta - gamma`` for Formulation 2, ``None`` otherwise."""
        return None if self.gamma is None else self.theta - self.gamma


def fusion_penalty(M, edges: AxisEdges, axis: str = "columns") -> float:
    """Weighted sum of Euclidean distances between fused columns or rows."""
    _check_axis(axis)
    M = np.asarray(M, dtype=float)
    U = M.T if axis == "columns" else M
    edges.check_bounds(U.shape[0])
    if not len(edges):
        return 0.0
    diff = U[edges.i] - edges.c[:, None] * U[edges.j]
    return float(edges.w @ np.sqrt((diff * diff).sum(axis=1)))


def bicluster_penalty(M, edges: EdgeWeights) -> float:
    return fusion_penalty(M, edges.columns, "columns") + fusion_penalty(M, edges.rows, "rows")


def squared_loss(data: TaskDataset, theta) -> float:
    R = data.residuals(theta)
    return float((R * R).sum())


def objective_f1(data: TaskDataset, theta, edges: EdgeWeights, hp: Hyperparameters) -> float:
    """Squared loss + lambda1 * l1 + lambda2 * (column + row fusion) at ``theta``."""
    theta = data.check_theta(theta)
    value = squared_loss(data, theta) + hp.lambda1 * np.abs(theta).sum()
    if hp.lambda2:
        value += hp.lambda2 * bicluster_penalty(theta, edges)
    return float(value)


def objective_f2(data: TaskDataset, theta, gamma, edges: EdgeWeights,
                 hp: Hyperparameters) -> float:
    """Formulation 2 objective with the fusion penalty moved onto ``gamma``."""
    theta = data.check_theta(theta)
    gamma = data.check_theta(gamma, "gamma")
    D = theta - gamma
    value = (squared_loss(data, theta) + hp.lambda1 * np.abs(theta).sum()
             + hp.lambda2 * float((D * D).sum()))
    if hp.lambda3:
        value += hp.lambda3 * bicluster_penalty(gamma, edges)
    return float(value)
