"""Synthetic checkerboard coefficient matrices and multi-task datasets.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence(seed)``,
spawned into three independent substreams: coefficients, design, noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .model import TaskDataset
from .selection import ClusterAssignment

THETA_STREAM, DESIGN_STREAM, NOISE_STREAM = 0, 1, 2


def _stream(seed: int, which: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed).spawn(3)[which]))


def even_partition(size: int, parts: int) -> list[int]:
    """Block sizes splitting ``size`` items into ``parts`` near-equal blocks."""
    base, extra = divmod(size, parts)
    return [base + (i < extra) for i in range(parts)]


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    p: int
    k: int
    row_partition: tuple[int, ...]
    col_partition: tuple[int, ...]
    zero_block_fraction: float = 0.5
    mu_support: tuple[float, ...] = (-2.0, -1.0, 1.0, 2.0)
    sigma_eps: float = 0.25
    sigma_noise: float = 1.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "row_partition", tuple(int(b) for b in self.row_partition))
        object.__setattr__(self, "col_partition", tuple(int(b) for b in self.col_partition))
        object.__setattr__(self, "mu_support", tuple(float(m) for m in self.mu_support))
        if min(self.n, self.p, self.k) < 1:
            raise InputError("n, p and k must be positive")
        if sum(self.row_partition) != self.p or min(self.row_partition, default=0) < 1:
            raise InputError(
                f"row_partition {list(self.row_partition)} must be positive and sum to p={self.p}")
        if sum(self.col_partition) != self.k or min(self.col_partition, default=0) < 1:
            raise InputError(
                f"col_partition {list(self.col_partition)} must be positive and sum to k={self.k}")
        if not 0 <= self.zero_block_fraction < 1:
            raise InputError("zero_block_fraction must lie in [0, 1)")
        if not self.mu_support or not np.isfinite(self.mu_support).all():
            raise InputError("mu_support must be a non-empty set of finite values")
        if self.sigma_eps < 0 or self.sigma_noise < 0:
            raise InputError("noise scales must be nonnegative")


def _labels(blocks):
    return np.repeat(np.arange(len(blocks)), blocks)


def checkerboard_theta(spec: GeneratorSpec):
    """True coefficient matrix with block structure, and its partition.

    Every block is zeroed independently with probability
    ``zero_block_fraction``; the others get a mean drawn uniformly from
    ``mu_support`` plus i.i.d. ``N(0, sigma_eps^2)`` jitter.  The returned
    partition labels blocks by construction, so two zero blocks remain
    distinct bi-clusters.
    """
    rng = _stream(spec.seed, THETA_STREAM)
    rows, cols = _labels(spec.row_partition), _labels(spec.col_partition)
    R, C = len(spec.row_partition), len(spec.col_partition)
    zero = rng.random((R, C)) < spec.zero_block_fraction
    mu = rng.choice(np.asarray(spec.mu_support), size=(R, C))
    mu[zero] = 0.0
    jitter = rng.normal(0.0, 1.0, size=(spec.p, spec.k)) * spec.sigma_eps
    jitter[zero[rows][:, cols]] = 0.0
    theta = mu[rows][:, cols] + jitter
    return theta, ClusterAssignment(rows, cols)


def simulate_dataset(theta_star, n: int, sigma_noise: float, seed: int) -> TaskDataset:
    """``Y = X theta_star + E`` with standard normal ``X`` and ``N(0, sigma^2)`` noise."""
    theta_star = np.asarray(theta_star, dtype=float)
    if n < 1:
        raise InputError("n must be positive")
    if sigma_noise < 0:
        raise InputError("sigma_noise must be nonnegative")
    p, k = theta_star.shape
    X = _stream(seed, DESIGN_STREAM).normal(size=(n, p))
    E = _stream(seed, NOISE_STREAM).normal(size=(n, k)) * sigma_noise
    return TaskDataset(X, X @ theta_star + E)


def generate(spec: GeneratorSpec):
    """Convenience: ``(dataset, theta_star, truth)`` for a spec."""
    theta, truth = checkerboard_theta(spec)
    return simulate_dataset(theta, spec.n, spec.sigma_noise, spec.seed), theta, truth
