"""Counting, partial-sum and inverse paths of a conditioned row, with their
fluid (law of large numbers) and diffusion (sqrt(n)) scalings.

Time is normalised so that the horizon maps to ``[0, 1]`` wherever a scaled
path is compared with a bridge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import GridPath, InterarrivalModel, StepPath, grid_times, DEFAULT_GRID_SIZE
from .samplers import ConditionedPoissonSample, ConditionedRow, _rate_functions

__all__ = [
    "ScaledEnsembleStats",
    "partial_sum_path",
    "counting_path",
    "inverse_path",
    "inverse_bound_check",
    "phi_array",
    "diffusion_scaled_counting",
    "diffusion_scaled_conditioned_poisson",
    "counting_sup_deviation",
    "partial_sum_sup_deviation",
]


@dataclass
class ScaledEnsembleStats:
    """Pointwise summaries of an ensemble of scaled paths.

    ``samples[r, k]`` is replication ``r`` at ``t_points[k]``; ``cov`` maps a
    pair of time points to ``(covariance, standard error)``.
    """

    t_points: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    mean_se: np.ndarray
    var_se: np.ndarray
    samples: np.ndarray
    cov: dict = field(default_factory=dict)


def partial_sum_path(row: ConditionedRow) -> StepPath:
    """``t -> xi_1 + ... + xi_floor(nt)`` on ``[0, 1]``, jumping at ``i/n``."""
    n = row.n
    epochs = np.arange(1, n + 1) / n
    return StepPath(0.0, epochs, row.partial_sums[:n], 1.0)


def counting_path(row: ConditionedRow) -> StepPath:
    """``A_n(t)``: number of partial sums ``S_1..S_n`` that are ``<= t``, on ``[0, T]``."""
    return StepPath(0.0, row.epochs, np.arange(1, row.n + 1, dtype=float), row.T)


def inverse_path(row: ConditionedRow, as_index: bool = False) -> StepPath:
    """Generalised inverse ``t -> inf{p in [0, 1] : S_{floor(np)} > t}`` on ``[0, T]``.

    The infimum is ``k/n`` for the first ``k`` with ``S_k > t``; past the last
    arrival the set is empty and the value is capped at 1. With
    ``as_index=True`` the path holds the integer ``k`` instead of ``k/n`` so
    comparisons against ``A_n`` can be made without rounding.
    """
    n = row.n
    S = row.epochs
    # before S_1 the first index with S_k > t is k = 1; after S_k it is k + 1
    idx = np.minimum(np.arange(2, n + 1, dtype=float), n)
    init = 1.0
    epochs = S[: n - 1]
    if not as_index:
        idx = idx / n
        init = 1.0 / n
    return StepPath(init, epochs, idx, row.T)


def inverse_bound_check(row: ConditionedRow, times=None, grid_points: int = 1001):
    """Check ``0 <= S_n^{-1}(t) - A_n(t)/n <= 1/n`` exactly.

    Evaluated on ``grid_points`` equispaced times in ``[0, T]`` plus every
    arrival epoch (both sides of each jump are covered since the paths are
    right-continuous and the grid brackets each epoch). The comparison is done
    in units of ``1/n`` on integers, so no rounding enters.
    Returns ``(violations, number_of_times_checked)``.
    """
    if times is None:
        times = np.union1d(grid_times(grid_points - 1, row.T), row.epochs)
    times = np.asarray(times, dtype=float)
    counts = counting_path(row)(times)
    inv = inverse_path(row, as_index=True)(times)
    gap = inv - counts  # integers held exactly in float64
    bad = int(np.count_nonzero((gap < 0) | (gap > 1)))
    return bad, int(times.size)


def phi_array(row: ConditionedRow, mu_n: float, root_n_divided: bool = False):
    """Centred, scaled interarrival times with the three summary diagnostics.

    Default scaling is ``sqrt(n) * (xi - mu_n)``, under which ``sum(phi**2)``
    tends to 1; ``root_n_divided=True`` gives ``(xi - mu_n) / sqrt(n)`` for
    side-by-side comparison. Returns ``(phi, sum_phi, sum_phi_sq, max_abs_phi)``.
    """
    n = row.n
    dev = row.xi[:n] - mu_n
    phi = dev / math.sqrt(n) if root_n_divided else math.sqrt(n) * dev
    return phi, float(np.cumsum(phi)[-1]), float(np.cumsum(phi * phi)[-1]), float(np.max(np.abs(phi)))


def diffusion_scaled_counting(row: ConditionedRow, m: int = DEFAULT_GRID_SIZE) -> GridPath:
    """``sqrt(n) * (A_n(tT)/n - t)`` on the grid ``t = i/m``; zero at both ends."""
    t = grid_times(m)
    counts = kernels.count_leq(row.epochs, t * row.T)
    n = row.n
    return GridPath(math.sqrt(n) * (counts / n - t), 1.0)


def diffusion_scaled_conditioned_poisson(sample: ConditionedPoissonSample,
                                         model: InterarrivalModel,
                                         m: int = DEFAULT_GRID_SIZE) -> GridPath:
    """``(#{epochs <= t} - n F(t)) / sqrt(n)`` on ``t = T i/m``, ``F = G(t)/G(T)``."""
    G, _ = _rate_functions(model)
    t = grid_times(m, sample.T)
    F = G(t) / G(sample.T)
    counts = kernels.count_leq(sample.epochs, t)
    return GridPath((counts - sample.n * F) / math.sqrt(sample.n), sample.T)


def counting_sup_deviation(row: ConditionedRow) -> float:
    """``sup_{0<=t<=T} |A_n(t)/n - t/T|``, exact."""
    return kernels.counting_sup_deviation(row.epochs, row.T)


def partial_sum_sup_deviation(row: ConditionedRow) -> float:
    """``sup_{0<=t<=1} |S_floor(nt)/T - t|``, exact (sup over each constancy interval)."""
    n = row.n
    x = np.concatenate([[0.0], row.epochs]) / row.T
    k = np.arange(n + 1)
    left = np.abs(x - k / n)
    right = np.abs(x[:n] - (k[:n] + 1) / n)
    return float(max(left.max(), right.max()))
