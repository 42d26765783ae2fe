"""Brownian motion, Brownian bridge and their combinations on a uniform grid.

All paths are exact in distribution at the grid points: Brownian motion is a
cumulative sum of independent normal increments and a bridge is obtained by
endpoint subtraction ``B(t) = W(t) - t W(1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import DEFAULT_GRID_SIZE, DomainError, GridPath, RandomStream, grid_times

__all__ = ["GaussianPathSpec", "KINDS", "sample_gaussian_path", "sample_gaussian_paths", "covariance"]

KINDS = ("bm", "bridge", "bridge_timechange", "bm_minus_bridge", "bm_minus_bm")


@dataclass(frozen=True)
class GaussianPathSpec:
    """Which Gaussian process to sample.

    kind
        ``bm`` (diffusion coefficient ``sigma``), ``bridge``, ``bridge_timechange``
        (``W0(F(t))`` for a cdf ``F`` on ``[0, horizon]``), ``bm_minus_bridge``
        (independent ``W_sigma - W0``) or ``bm_minus_bm``
        (``theta t + W_sigma - W'_sigma_prime``, the heavy-traffic limit input).
    """

    kind: str
    m: int = DEFAULT_GRID_SIZE
    sigma: float = 1.0
    F: Optional[Callable] = None
    horizon: float = 1.0
    theta: float = 0.0
    sigma_prime: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.m < 1:
            raise ValueError("grid size must be at least 1")
        if self.sigma < 0 or self.sigma_prime < 0:
            raise ValueError("diffusion coefficients must be nonnegative")
        if self.kind == "bridge_timechange" and self.F is None:
            raise ValueError("bridge_timechange needs a distribution function F")
        if self.kind != "bridge_timechange" and self.kind != "bm" and self.horizon != 1.0:
            raise ValueError(f"{self.kind} paths live on [0, 1]")

    def times(self) -> np.ndarray:
        return grid_times(self.m, self.horizon)


def _bm(gen, rows, m, var_step):
    z = gen.standard_normal((rows, m))
    out = np.zeros((rows, m + 1))
    out[:, 1:] = np.cumsum(math.sqrt(var_step) * z, axis=1)
    return out


def _bridge(gen, rows, m):
    t = grid_times(m)
    W = _bm(gen, rows, m, 1.0 / m)
    return W - t * W[:, -1:]


def _timechanged_bridge(gen, rows, spec):
    u = np.asarray(spec.F(spec.times()), dtype=float)
    if u[0] != 0.0 or u[-1] != 1.0 or np.any(np.diff(u) < 0):
        raise DomainError("F must be nondecreasing with F(0) = 0 and F(horizon) = 1")
    z = gen.standard_normal((rows, spec.m))
    W = np.zeros((rows, spec.m + 1))
    W[:, 1:] = np.cumsum(np.sqrt(np.diff(u)) * z, axis=1)
    return W - u * W[:, -1:]


def sample_gaussian_paths(spec: GaussianPathSpec, stream: RandomStream, count: int) -> np.ndarray:
    """``count`` independent paths from one stream, as a ``(count, m + 1)`` array."""
    gen = stream.generator()
    m = spec.m
    if spec.kind == "bm":
        return _bm(gen, count, m, spec.sigma ** 2 * spec.horizon / m)
    if spec.kind == "bridge":
        return _bridge(gen, count, m)
    if spec.kind == "bridge_timechange":
        return _timechanged_bridge(gen, count, spec)
    if spec.kind == "bm_minus_bridge":
        W = _bm(gen, count, m, spec.sigma ** 2 / m)
        return W - _bridge(gen, count, m)
    W = _bm(gen, count, m, spec.sigma ** 2 / m)
    W2 = _bm(gen, count, m, spec.sigma_prime ** 2 / m)
    return spec.theta * grid_times(m) + W - W2


def sample_gaussian_path(spec: GaussianPathSpec, stream: RandomStream) -> GridPath:
    return GridPath(sample_gaussian_paths(spec, stream, 1)[0], spec.horizon)


def covariance(spec: GaussianPathSpec, s: float, t: float) -> float:
    """Closed-form ``Cov(X(s), X(t))``; the arguments are symmetrised."""
    s, t = min(s, t), max(s, t)
    if s < 0 or t > spec.horizon:
        raise DomainError(f"times must lie in [0, {spec.horizon}]")
    if spec.kind == "bm":
        return spec.sigma ** 2 * s
    if spec.kind == "bridge":
        return s * (1.0 - t)
    if spec.kind == "bridge_timechange":
        Fs, Ft = (float(v) for v in spec.F(np.array([s, t])))
        return Fs * (1.0 - Ft)
    if spec.kind == "bm_minus_bridge":
        return spec.sigma ** 2 * s + s * (1.0 - t)
    return (spec.sigma ** 2 + spec.sigma_prime ** 2) * s
