"""Cluster extraction, noise estimation and clustering thresholds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import InputError


def canonical_labels(labels) -> np.ndarray:
    """Relabel so that labels are 0-based in order of first occurrence."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return labels.astype(np.int64)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return rank[inverse.ravel()].astype(np.int64)


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    row_labels: np.ndarray
    col_labels: np.ndarray

    def __post_init__(self):
        for name in ("row_labels", "col_labels"):
            a = canonical_labels(np.asarray(getattr(self, name)).ravel())
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_row_clusters(self) -> int:
        return int(self.row_labels.max()) + 1 if self.row_labels.size else 0

    @property
    def n_col_clusters(self) -> int:
        return int(self.col_labels.max()) + 1 if self.col_labels.size else 0

    def bicluster(self, r: int, c: int) -> tuple[int, int]:
        return int(self.row_labels[r]), int(self.col_labels[c])

    def to_dict(self) -> dict:
        return {"row_labels": self.row_labels.tolist(),
                "col_labels": self.col_labels.tolist(),
                "n_row_clusters": self.n_row_clusters,
                "n_col_clusters": self.n_col_clusters}

    @classmethod
    def from_dict(cls, d) -> ClusterAssignment:
        return cls(np.asarray(d["row_labels"], dtype=int), np.asarray(d["col_labels"], dtype=int))


class UnionFind:
    """Disjoint sets with path halving and union by size."""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.size = [1] * size

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def labels(self) -> np.ndarray:
        return canonical_labels([self.find(a) for a in range(len(self.parent))])


def threshold_components(U, tau: float) -> np.ndarray:
    """Connected components of the graph joining rows of ``U`` within distance ``tau``."""
    U = np.asarray(U, dtype=float)
    m = U.shape[0]
    uf = UnionFind(m)
    if m > 1:
        d = pdist(U)
        i, j = np.triu_indices(m, 1)
        for a, b in zip(i[d <= tau], j[d <= tau]):
            uf.union(int(a), int(b))
    return uf.labels()


def extract_clusters(M, tau_r: float, tau_c: float) -> ClusterAssignment:
    """Group rows (columns) of ``M`` whose Euclidean distance is at most ``tau_r`` (``tau_c``).

    Groups are the transitive closure of the pairwise rule.
    """
    M = np.asarray(M, dtype=float)
    if tau_r < 0 or tau_c < 0:
        raise InputError("thresholds must be nonnegative")
    return ClusterAssignment(threshold_components(M, tau_r), threshold_components(M.T, tau_c))


def estimate_sigma(data, theta) -> float:
    """Sample standard deviation of all residual entries of ``Y - X theta``."""
    R = data.residuals(theta)
    if R.size < 2:
        raise InputError("need at least two residuals to estimate sigma")
    return float(np.std(R, ddof=1))


def pairwise_distance_std(U) -> float:
    """Population standard deviation of all pairwise row distances of ``U``."""
    U = np.asarray(U, dtype=float)
    if U.shape[0] < 2:
        return 0.0
    return float(np.std(pdist(U)))


def cluster_thresholds(M, sigma: float, n: int, p: int) -> tuple[float, float]:
    """``tau = (sigma * sqrt(log(p) / n) + std(v)) / 2`` for rows and columns.

    ``v`` collects the distances between all pairs of rows (for ``tau_r``)
    or columns (for ``tau_c``) of ``M``.  An axis with fewer than two items
    gets a zero threshold.
    """
    M = np.asarray(M, dtype=float)
    if sigma < 0:
        raise InputError("sigma must be nonnegative")
    if n < 1:
        raise InputError("n must be positive")
    if p < 2:
        raise InputError("p must be at least 2 so that log(p) > 0")
    noise = sigma * np.sqrt(np.log(p) / n)
    rows, cols = M.shape
    tau_r = 0.5 * (noise + pairwise_distance_std(M)) if rows >= 2 else 0.0
    tau_c = 0.5 * (noise + pairwise_distance_std(M.T)) if cols >= 2 else 0.0
    return float(tau_r), float(tau_c)
