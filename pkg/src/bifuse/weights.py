"""k-nearest-neighbour Gaussian-kernel fusion weights."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DegenerateWeightsError, InputError
from .model import AxisEdges, EdgeWeights, _check_axis
from .selection import UnionFind

# kernel values below this are treated as absent edges
UNDERFLOW = 1e-12


def knn_gaussian_weights(M, kappa: int, phi: float, axis: str = "columns",
                         relative: bool = False) -> AxisEdges:
    """Kernel weights ``exp(-phi * d^2)`` on the symmetrised kappa-NN graph.

    An edge ``(i, j)`` exists when either item is among the other's
    ``kappa`` nearest neighbours in Euclidean distance.  Distance ties are
    broken toward the smaller index.  With ``relative`` every weight is
    divided by the largest one, i.e. ``d^2`` is measured from the closest
    pair; weights that are normalised afterwards are unchanged but no longer
    underflow.
    """
    _check_axis(axis)
    M = np.asarray(M, dtype=float)
    U = M.T if axis == "columns" else M
    m = U.shape[0]
    if kappa < 1 or kappa >= m:
        raise InputError(f"kappa={kappa} must lie in [1, {m - 1}] for {m} items")
    if phi < 0:
        raise InputError("phi must be nonnegative")
    d2 = squareform(pdist(U, "sqeuclidean"))
    ranked = np.where(np.eye(m, dtype=bool), np.inf, d2)
    nbrs = np.argsort(ranked, axis=1, kind="stable")[:, :kappa]
    adj = np.zeros((m, m), dtype=bool)
    adj[np.repeat(np.arange(m), kappa), nbrs.ravel()] = True
    adj |= adj.T
    i, j = np.nonzero(np.triu(adj, 1))
    shift = d2[i, j].min() if relative and len(i) else 0.0
    w = np.exp(-phi * (d2[i, j] - shift))
    keep = w >= UNDERFLOW
    return AxisEdges(i[keep], j[keep], w[keep])


def bridge_components(edges: AxisEdges, M, phi: float, axis: str = "columns",
                      shift: float = 0.0) -> AxisEdges:
    """Join the connected components of ``edges`` with the shortest links.

    Candidate pairs are scanned in order of increasing distance and a pair is
    added only when it joins two components (Kruskal's rule), so an already
    connected graph is returned unchanged.  Added edges carry the kernel
    value ``exp(-phi * (d^2 - shift))``, floored at ``UNDERFLOW`` so that no
    bridge vanishes.
    """
    _check_axis(axis)
    M = np.asarray(M, dtype=float)
    U = M.T if axis == "columns" else M
    m = U.shape[0]
    uf = UnionFind(m)
    for a, b in zip(edges.i.tolist(), edges.j.tolist()):
        uf.union(a, b)
    if m < 2 or uf.size[uf.find(0)] == m:
        return edges
    d2 = pdist(U, "sqeuclidean")
    ii, jj = np.triu_indices(m, 1)
    added = []
    for idx in np.argsort(d2, kind="stable"):
        a, b = int(ii[idx]), int(jj[idx])
        if uf.union(a, b):
            added.append((a, b, max(float(np.exp(-phi * (d2[idx] - shift))), UNDERFLOW)))
            if uf.size[uf.find(a)] == m:
                break
    i = np.concatenate([edges.i, [a for a, _, _ in added]]).astype(np.int64)
    j = np.concatenate([edges.j, [b for _, b, _ in added]]).astype(np.int64)
    w = np.concatenate([edges.w, [x for _, _, x in added]])
    c = np.concatenate([edges.c, np.ones(len(added))])
    order = np.lexsort((j, i))
    return AxisEdges(i[order], j[order], w[order], c[order])


def _rescale(edges: AxisEdges, target: float, axis: str) -> AxisEdges:
    if not len(edges):
        return edges
    total = edges.total
    if total <= 0:
        raise DegenerateWeightsError(f"all {axis} weights are zero")
    return AxisEdges(edges.i, edges.j, edges.w * (target / total), edges.c)


def normalize_weights(edges: EdgeWeights, n: int, p: int) -> EdgeWeights:
    """Rescale column weights to sum to 1/sqrt(n) and row weights to 1/sqrt(p)."""
    if n < 1 or p < 1:
        raise InputError("n and p must be positive")
    return EdgeWeights(_rescale(edges.columns, 1 / np.sqrt(n), "column"),
                       _rescale(edges.rows, 1 / np.sqrt(p), "row"))


def build_weights(theta_hat, n: int, kappa: int = 5, phi: float = 20.0,
                  mode: str = "bicluster", scale: bool = True,
                  connect: bool = True) -> EdgeWeights:
    """Normalised column and row weights from a pilot estimate.

    With ``scale`` the pilot is divided by its Frobenius norm first, so that
    ``phi`` acts on a unit-scale matrix regardless of the coefficient
    magnitudes.  ``kappa`` is clipped to ``size - 1`` on axes with fewer
    items; an axis with a single item gets no edges.  Kernel values are
    taken relative to the closest pair on each axis, which leaves the
    normalised weights unchanged and keeps them from underflowing.  With
    ``connect`` a disconnected kappa-NN graph is completed by
    :func:`bridge_components`, so that a large enough fusion penalty merges
    every item on the axis.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    p, k = theta_hat.shape
    norm = np.linalg.norm(theta_hat)
    if scale and norm > 0:
        theta_hat = theta_hat / norm
    axes = {}
    for axis, size in (("columns", k), ("rows", p)):
        if size < 2:
            axes[axis] = AxisEdges()
        else:
            axes[axis] = knn_gaussian_weights(theta_hat, min(kappa, size - 1), phi, axis,
                                              relative=True)
            if connect:
                U = theta_hat.T if axis == "columns" else theta_hat
                axes[axis] = bridge_components(axes[axis], theta_hat, phi, axis,
                                               pdist(U, "sqeuclidean").min())
    return normalize_weights(EdgeWeights(axes["columns"], axes["rows"]), n, p).restrict(mode)
