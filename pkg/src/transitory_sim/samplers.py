"""Conditioned arrival data: i.i.d. renewals, order-statistics Poisson epochs,
rejection-sampled conditioned rows, and the conditional mean interarrival time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .core import (
    Exponential,
    InterarrivalModel,
    InvalidModel,
    PoissonRate,
    QUAD_TOL,
    RandomStream,
    adaptive_simpson,
)
from .stats import DataError, ks_two_sample

__all__ = [
    "AcceptanceTooLow",
    "ConditionedRow",
    "ConditionedPoissonSample",
    "sample_iid_renewal",
    "sample_conditioned_poisson_os",
    "sample_conditioned_poisson_os_batch",
    "sample_conditioned_renewal_rejection",
    "conditioned_rows",
    "conditional_mean_mu_n",
    "estimate_acceptance",
    "exchangeability_diagnostic",
    "DEFAULT_MAX_ATTEMPTS",
]

DEFAULT_MAX_ATTEMPTS = 10**6
# rows of candidate draws are generated in blocks of 16, 32, 64, ... capped at
# roughly 4M variates; the schedule is fixed so streams are consumed identically
_FIRST_BLOCK = 16
_BLOCK_VARIATES = 1 << 22


class AcceptanceTooLow(RuntimeError):
    """Rejection sampling gave up; ``estimate`` is the empirical acceptance rate seen."""

    def __init__(self, attempts: int, accepted: int, n: int, T: float):
        self.attempts = attempts
        self.estimate = accepted / attempts if attempts else 0.0
        self.n, self.T = n, T
        super().__init__(
            f"no row with exactly n={n} renewals in [0, {T}] after {attempts} attempts "
            f"(empirical acceptance {self.estimate:.3g}); rescale the model so that "
            f"E[xi] is close to T/n")


@dataclass(frozen=True, eq=False)
class ConditionedRow:
    """``(xi_1, ..., xi_{n+1})`` with ``xi_1 + ... + xi_n <= T < xi_1 + ... + xi_{n+1}``."""

    n: int
    T: float
    xi: np.ndarray

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float).reshape(-1)
        xi.flags.writeable = False
        object.__setattr__(self, "xi", xi)
        if self.n < 1 or xi.size != self.n + 1:
            raise ValueError("a row holds n + 1 interarrival times with n >= 1")
        if np.any(xi <= 0):
            raise ValueError("interarrival times must be positive")
        S = self.partial_sums
        if not (S[self.n - 1] <= self.T < S[self.n]):
            raise ValueError("row does not satisfy S_n <= T < S_{n+1}")

    @property
    def partial_sums(self) -> np.ndarray:
        """``S_1, ..., S_{n+1}`` (sequential cumulative sums)."""
        return np.cumsum(self.xi)

    @property
    def epochs(self) -> np.ndarray:
        """The ``n`` arrival epochs in ``[0, T]``."""
        return self.partial_sums[: self.n]


@dataclass(frozen=True, eq=False)
class ConditionedPoissonSample:
    n: int
    T: float
    epochs: np.ndarray

    def __post_init__(self):
        e = np.array(self.epochs, dtype=float).reshape(-1)
        e.flags.writeable = False
        object.__setattr__(self, "epochs", e)
        if e.size != self.n:
            raise ValueError("expected n epochs")
        if e.size and (e[0] <= 0 or e[-1] >= self.T or np.any(np.diff(e) <= 0)):
            raise ValueError("epochs must be strictly increasing inside (0, T)")


def sample_iid_renewal(model: InterarrivalModel, T: float, stream: RandomStream):
    """Unconditioned renewal epochs in ``[0, T]`` and the count ``A(T)``."""
    if not T > 0:
        raise ValueError("T must be positive")
    gen = stream.generator()
    chunk = max(16, int(math.ceil(2.0 * T / model.mean())))
    pieces = []
    total = 0.0
    while True:
        xi = model.ppf(gen.random(chunk))
        sums = np.cumsum(np.concatenate([[total], xi]))[1:]
        pieces.append(sums)
        total = float(sums[-1])
        if total > T:
            break
        chunk *= 2
    sums = np.concatenate(pieces)
    epochs = sums[: int(np.searchsorted(sums, T, side="right"))]
    return epochs, int(epochs.size)


def _rate_functions(model: InterarrivalModel):
    if isinstance(model, (PoissonRate, Exponential)):
        return model.cumulative_rate, model.cumulative_rate_inverse
    raise InvalidModel("order-statistics sampling needs a Poisson rate model "
                       "(PoissonRate, or Exponential for a homogeneous rate)")


def _os_rows(model, n: int, T: float, gen: np.random.Generator, size: int) -> np.ndarray:
    G, G_inv = _rate_functions(model)
    if isinstance(model, PoissonRate) and T > model.horizon:
        raise InvalidModel(f"rate function is only defined up to {model.horizon}")
    total = float(G(T))
    if not total > 0:
        raise InvalidModel("cumulative rate G(T) is zero")
    out = np.sort(G_inv(gen.random((size, n)) * total), axis=1)
    bad = _bad_os_rows(out, T)
    while bad.size:
        # ties and endpoint hits have probability zero; redraw those rows
        fresh = np.sort(G_inv(gen.random((bad.size, n)) * total), axis=1)
        out[bad] = fresh
        bad = bad[_bad_os_rows(fresh, T)]
    return out


def _bad_os_rows(rows: np.ndarray, T: float) -> np.ndarray:
    ok = (rows[:, 0] > 0) & (rows[:, -1] < T)
    if rows.shape[1] > 1:
        ok &= np.all(np.diff(rows, axis=1) > 0, axis=1)
    return np.flatnonzero(~ok)


def sample_conditioned_poisson_os(model: InterarrivalModel, n: int, T: float,
                                  stream: RandomStream) -> ConditionedPoissonSample:
    """Poisson arrival epochs given exactly ``n`` arrivals in ``[0, T]``.

    The epochs are the sorted values of ``n`` i.i.d. draws from
    ``F(t) = G(t) / G(T)``, ``G`` the cumulative rate, obtained by inversion.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rows = _os_rows(model, n, T, stream.generator(), 1)
    return ConditionedPoissonSample(n, T, rows[0])


def sample_conditioned_poisson_os_batch(model: InterarrivalModel, n: int, T: float,
                                        stream: RandomStream, size: int) -> np.ndarray:
    """``size`` independent order-statistics samples as a ``(size, n)`` array."""
    if n < 1 or size < 1:
        raise ValueError("n and size must be at least 1")
    return _os_rows(model, n, T, stream.generator(), size)


def sample_conditioned_renewal_rejection(model: InterarrivalModel, n: int, T: float,
                                         stream: RandomStream,
                                         max_attempts: int = DEFAULT_MAX_ATTEMPTS):
    """Draw i.i.d. rows ``(xi_1, ..., xi_{n+1})`` until one has exactly ``n`` renewals in ``[0, T]``.

    Returns ``(row, attempts)``. Raises :class:`AcceptanceTooLow` after
    ``max_attempts`` rejected rows.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    gen = stream.generator()
    cap = max(1, _BLOCK_VARIATES // (n + 1))
    block = _FIRST_BLOCK
    attempts = 0
    while attempts < max_attempts:
        b = min(block, cap, max_attempts - attempts)
        xi = model.ppf(gen.random((b, n + 1)))
        j = kernels.first_accepted(xi, n, T)
        if j >= 0:
            return ConditionedRow(n, T, xi[j]), attempts + j + 1
        attempts += b
        block *= 2
    raise AcceptanceTooLow(attempts, 0, n, T)


def conditioned_rows(model: InterarrivalModel, n: int, T: float, seed: int,
                     indices: Iterable[int], max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                     substream: Sequence[int] = ()) -> list[ConditionedRow]:
    """One rejection-sampled row per stream index, each from its own stream."""
    rows = []
    for i in indices:
        stream = RandomStream(seed, i, tuple(substream))
        rows.append(sample_conditioned_renewal_rejection(model, n, T, stream, max_attempts)[0])
    return rows


def conditional_mean_mu_n(model: InterarrivalModel, n: int, T: float,
                          tol: float = QUAD_TOL) -> float:
    """``E[xi_{n,1} | exactly n renewals in [0, T]]``.

    Computed as ``int_0^T (1 - L(u)/L(T))^n du`` with ``L`` the integrated
    hazard, by adaptive Simpson to absolute tolerance ``tol``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not T > 0:
        raise ValueError("T must be positive")
    total = float(model.integrated_hazard(T))
    if not (math.isfinite(total) and total > 0):
        raise InvalidModel("integrated hazard at T must be positive and finite")
    if n == 0:
        return float(T)

    def integrand(u: float) -> float:
        r = float(model.integrated_hazard(u)) / total
        if r >= 1.0:
            return 0.0
        return math.exp(n * math.log1p(-r))

    return adaptive_simpson(integrand, 0.0, float(T), tol)


def estimate_acceptance(model: InterarrivalModel, n: int, T: float, stream: RandomStream,
                        reps: int) -> tuple[float, float]:
    """Monte Carlo ``P(A(T) = n)`` from ``reps`` unconditioned rows, with binomial SE."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if n < 1:
        raise ValueError("n must be at least 1")
    gen = stream.generator()
    cap = max(1, _BLOCK_VARIATES // (n + 1))
    hits = 0
    done = 0
    while done < reps:
        b = min(cap, reps - done)
        xi = model.ppf(gen.random((b, n + 1)))
        hits += int(np.count_nonzero(kernels.accept_mask(xi, n, T)))
        done += b
    p = hits / reps
    return p, math.sqrt(p * (1.0 - p) / reps)


def exchangeability_diagnostic(rows: Sequence[ConditionedRow], i: int, j: int):
    """Two-sample KS between the laws of ``xi_{n,i}`` and ``xi_{n,j}`` (1-based) across rows."""
    if len(rows) < 2:
        raise DataError("need at least two rows")
    n, T = rows[0].n, rows[0].T
    if any(r.n != n or r.T != T for r in rows):
        raise DataError("rows must share n and T")
    if not (1 <= i <= n and 1 <= j <= n):
        raise ValueError(f"indices must lie in 1..{n}")
    a = np.array([r.xi[i - 1] for r in rows])
    b = np.array([r.xi[j - 1] for r in rows])
    if i == j:
        return 0.0, 1.0
    return ks_two_sample(a, b)
