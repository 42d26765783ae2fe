"""Statistical test kernel: Kolmogorov-Smirnov, Pearson chi-square, ensemble moments."""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy import special

__all__ = [
    "DataError",
    "kolmogorov_sf",
    "ks_one_sample",
    "ks_two_sample",
    "chi_square_gof",
    "pool_bins",
    "mean_and_se",
    "variance_and_se",
    "covariance_and_se",
]

SERIES_CUTOFF = 1e-12


class DataError(ValueError):
    """Input data unusable for the requested statistic."""


def kolmogorov_sf(x: float) -> float:
    """``P(K > x)`` for the limiting Kolmogorov distribution.

    Uses ``2 sum (-1)^(k-1) exp(-2 k^2 x^2)`` for ``x >= 1`` and the Jacobi
    theta form of the cdf below that; both series stop once a term drops
    under ``1e-12``.
    """
    if x <= 0:
        return 1.0
    if x >= 1.0:
        total, k = 0.0, 1
        while True:
            term = math.exp(-2.0 * k * k * x * x)
            total += term if k % 2 else -term
            if term < SERIES_CUTOFF:
                break
            k += 1
        return min(1.0, max(0.0, 2.0 * total))
    c = math.pi ** 2 / (8.0 * x * x)
    total, k = 0.0, 1
    while True:
        term = math.exp(-(2 * k - 1) ** 2 * c)
        total += term
        if term < SERIES_CUTOFF:
            break
        k += 1
    return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / x * total))


def _clean(samples, minimum: int = 5) -> np.ndarray:
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size < minimum:
        raise DataError(f"need at least {minimum} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DataError("samples contain non-finite values")
    return np.sort(x)


def ks_one_sample(samples, target_cdf: Callable) -> tuple[float, float]:
    """Return ``(D, p)`` for the one-sample KS test of ``samples`` against ``target_cdf``."""
    x = _clean(samples)
    N = x.size
    F = np.asarray(target_cdf(x), dtype=float)
    i = np.arange(1, N + 1)
    D = float(max(np.max(i / N - F), np.max(F - (i - 1) / N)))
    return D, kolmogorov_sf(math.sqrt(N) * D)


def ks_two_sample(a, b) -> tuple[float, float]:
    """Return ``(D, p)``; ``p`` uses the effective size ``na*nb/(na+nb)``."""
    xa, xb = _clean(a), _clean(b)
    pooled = np.concatenate([xa, xb])
    Fa = np.searchsorted(xa, pooled, side="right") / xa.size
    Fb = np.searchsorted(xb, pooled, side="right") / xb.size
    D = float(np.max(np.abs(Fa - Fb)))
    en = xa.size * xb.size / (xa.size + xb.size)
    return D, kolmogorov_sf(math.sqrt(en) * D)


def pool_bins(counts, expected, min_expected: float = 5.0):
    """Merge adjacent bins left to right until each group expects ``min_expected``.

    A short final group is folded into its predecessor, so both tails get pooled.
    Returns the pooled ``(observed, expected)`` arrays.
    """
    obs_groups, exp_groups = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(counts, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_groups.append(o_acc)
            exp_groups.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if obs_groups:
            obs_groups[-1] += o_acc
            exp_groups[-1] += e_acc
        else:
            obs_groups.append(o_acc)
            exp_groups.append(e_acc)
    return np.array(obs_groups), np.array(exp_groups)


def chi_square_gof(counts: Sequence[int], expected: Sequence[float]) -> tuple[float, float]:
    """Pearson goodness of fit of a histogram against bin probabilities ``expected``."""
    counts = np.asarray(counts, dtype=float).reshape(-1)
    probs = np.asarray(expected, dtype=float).reshape(-1)
    if counts.size == 0 or counts.sum() <= 0:
        raise DataError("empty histogram")
    if counts.shape != probs.shape:
        raise DataError("counts and expected probabilities differ in length")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("expected probabilities must be nonnegative and sum to 1")
    obs, exp = pool_bins(counts, probs * counts.sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(exp > 0, (obs - exp) ** 2 / exp, np.where(obs > 0, np.inf, 0.0))
    stat = float(terms.sum())
    dof = obs.size - 1
    if dof <= 0:
        return stat, 1.0
    return stat, float(special.gammaincc(dof / 2.0, stat / 2.0))


def mean_and_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def variance_and_se(x) -> tuple[float, float]:
    """Unbiased sample variance with the delta-method standard error ``sqrt((m4 - m2^2)/R)``."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    m2 = float(np.mean(d * d))
    m4 = float(np.mean(d ** 4))
    return float(x.var(ddof=1)), math.sqrt(max(m4 - m2 * m2, 0.0) / x.size)


def covariance_and_se(x, y) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    prod = (x - x.mean()) * (y - y.mean())
    R = x.size
    cov = float(prod.sum() / (R - 1))
    return cov, float(prod.std(ddof=1) / math.sqrt(R))
