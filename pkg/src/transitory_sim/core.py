"""Distributions, cadlag paths, time grids and seeded random streams.

Everything in the package is built from four value types defined here:
interarrival models (with cdf/density/hazard/integrated hazard/inverse cdf),
``StepPath`` (right-continuous piecewise-constant functions on ``[0, T]``),
``GridPath`` (functions sampled on a uniform grid) and ``RandomStream``
(a ``(seed, stream_index)`` pair naming an independent numpy generator).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

__all__ = [
    "DomainError",
    "InvalidModel",
    "TimeHorizon",
    "InterarrivalModel",
    "Exponential",
    "Uniform",
    "Gamma",
    "PoissonRate",
    "parse_model",
    "adaptive_simpson",
    "distribution_eval",
    "StepPath",
    "GridPath",
    "RandomStream",
    "step_path_eval",
    "step_path_sup_neg",
    "DEFAULT_GRID_SIZE",
]

DEFAULT_GRID_SIZE = 1024
QUAD_TOL = 1e-10


class DomainError(ValueError):
    """Argument outside the domain of a function."""


class InvalidModel(ValueError):
    """Model parameters that cannot support the requested computation."""


@dataclass(frozen=True)
class TimeHorizon:
    T: float

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise DomainError(f"horizon must be positive and finite, got {self.T}")


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = QUAD_TOL, max_depth: int = 60,
                     pieces: int = 16) -> float:
    """Integrate ``f`` over ``[a, b]`` by adaptive Simpson with absolute tolerance ``tol``.

    The interval is first cut into ``pieces`` equal panels (sharp integrands such as
    ``(1 - u)**999`` would otherwise fool the first error estimate) and the tolerance
    is shared between panels in proportion to their width.
    """
    if b < a:
        return -adaptive_simpson(f, b, a, tol, max_depth, pieces)
    if b == a:
        return 0.0
    width = b - a
    total = 0.0
    edges = [a + (b - a) * i / pieces for i in range(pieces)] + [b]
    for lo, hi in zip(edges[:-1], edges[1:]):
        flo, fhi = f(lo), f(hi)
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        whole = (hi - lo) * (flo + 4.0 * fmid + fhi) / 6.0
        # explicit stack: (lo, hi, f(lo), f(mid), f(hi), estimate, tol, depth)
        stack = [(lo, hi, flo, fmid, fhi, whole, tol * (hi - lo) / width, 0)]
        while stack:
            x0, x1, f0, fm, f1, est, eps, depth = stack.pop()
            xm = 0.5 * (x0 + x1)
            xl, xr = 0.5 * (x0 + xm), 0.5 * (xm + x1)
            fl, fr = f(xl), f(xr)
            left = (xm - x0) * (f0 + 4.0 * fl + fm) / 6.0
            right = (x1 - xm) * (fm + 4.0 * fr + f1) / 6.0
            delta = left + right - est
            if depth >= max_depth or abs(delta) <= 15.0 * eps:
                total += left + right + delta / 15.0
            else:
                stack.append((xm, x1, fm, fr, f1, right, 0.5 * eps, depth + 1))
                stack.append((x0, xm, f0, fl, fm, left, 0.5 * eps, depth + 1))
    return total


class InterarrivalModel:
    """Nonnegative absolutely continuous law with finite mean.

    Subclasses provide vectorised ``cdf``, ``sf``, ``pdf``, ``integrated_hazard``
    and ``ppf``; ``hazard`` is derived. ``scaled(c)`` returns the law of ``c * xi``.
    """

    family: str = ""
    #: upper end of the support (``inf`` when unbounded)
    support_end: float = math.inf

    def cdf(self, t):
        raise NotImplementedError

    def sf(self, t):
        return 1.0 - self.cdf(t)

    def pdf(self, t):
        raise NotImplementedError

    def hazard(self, t):
        t = np.asarray(t, dtype=float)
        surv = self.sf(t)
        if np.any(surv <= 0.0):
            raise DomainError("hazard undefined where 1 - F(t) = 0")
        return self.pdf(t) / surv

    def integrated_hazard(self, t):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        raise NotImplementedError

    def scaled(self, factor: float) -> "InterarrivalModel":
        raise NotImplementedError

    def spec(self) -> str:
        """Compact string form accepted by :func:`parse_model`."""
        raise NotImplementedError

    def __str__(self):
        return self.spec()


@dataclass(frozen=True)
class Exponential(InterarrivalModel):
    rate: float = 1.0
    family = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise InvalidModel("exponential rate must be positive")

    def cdf(self, t):
        return -np.expm1(-self.rate * np.asarray(t, dtype=float))

    def sf(self, t):
        return np.exp(-self.rate * np.asarray(t, dtype=float))

    def pdf(self, t):
        return self.rate * self.sf(t)

    def hazard(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.rate)

    def integrated_hazard(self, t):
        return self.rate * np.asarray(t, dtype=float)

    def ppf(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def mean(self):
        return 1.0 / self.rate

    def variance(self):
        return 1.0 / self.rate ** 2

    def scaled(self, factor):
        return Exponential(self.rate / factor)

    # homogeneous Poisson view, used by the order-statistics sampler
    def cumulative_rate(self, t):
        return self.rate * np.asarray(t, dtype=float)

    def cumulative_rate_inverse(self, y):
        return np.asarray(y, dtype=float) / self.rate

    def spec(self):
        return f"exp:{self.rate!r}"


@dataclass(frozen=True)
class Uniform(InterarrivalModel):
    b: float = 1.0
    family = "uniform"

    def __post_init__(self):
        if not self.b > 0:
            raise InvalidModel("uniform upper end must be positive")
        object.__setattr__(self, "support_end", float(self.b))

    def cdf(self, t):
        return np.clip(np.asarray(t, dtype=float) / self.b, 0.0, 1.0)

    def sf(self, t):
        return 1.0 - self.cdf(t)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= 0) & (t < self.b), 1.0 / self.b, 0.0)

    def integrated_hazard(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(t < self.b, -np.log1p(-np.minimum(t, self.b) / self.b), np.inf)

    def ppf(self, u):
        return np.asarray(u, dtype=float) * self.b

    def mean(self):
        return 0.5 * self.b

    def variance(self):
        return self.b ** 2 / 12.0

    def scaled(self, factor):
        return Uniform(self.b * factor)

    def spec(self):
        return f"unif:{self.b!r}"


@dataclass(frozen=True)
class Gamma(InterarrivalModel):
    shape: float = 1.0
    scale: float = 1.0
    family = "gamma"

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise InvalidModel("gamma shape and scale must be positive")

    def cdf(self, t):
        return special.gammainc(self.shape, np.asarray(t, dtype=float) / self.scale)

    def sf(self, t):
        return special.gammaincc(self.shape, np.asarray(t, dtype=float) / self.scale)

    def pdf(self, t):
        x = np.asarray(t, dtype=float) / self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            logf = (self.shape - 1.0) * np.log(x) - x - special.gammaln(self.shape)
        return np.exp(logf) / self.scale

    def integrated_hazard(self, t):
        x = np.asarray(t, dtype=float) / self.scale
        lower = special.gammainc(self.shape, x)
        upper = special.gammaincc(self.shape, x)
        # -log(1 - P) loses digits once P is small; -log(Q) once Q is small
        with np.errstate(divide="ignore"):
            return np.where(lower < 0.5, -np.log1p(-lower), -np.log(upper))

    def ppf(self, u):
        return self.scale * special.gammaincinv(self.shape, np.asarray(u, dtype=float))

    def mean(self):
        return self.shape * self.scale

    def variance(self):
        return self.shape * self.scale ** 2

    def scaled(self, factor):
        return Gamma(self.shape, self.scale * factor)

    def spec(self):
        return f"gamma:{self.shape!r},{self.scale!r}"


@dataclass(frozen=True)
class PoissonRate(InterarrivalModel):
    """Nonhomogeneous Poisson rate, linear between ``knots``.

    ``left``/``right`` hold the rate at the two ends of each segment, so piecewise
    constant rates (``left == right``) and continuous piecewise-linear rates are
    both covered. As a law on ``[0, H]`` (``H`` the last knot) the model has
    ``F(t) = G(t) / G(H)`` with ``G`` the cumulative rate.
    """

    knots: tuple = (0.0, 1.0)
    left: tuple = (1.0,)
    right: tuple = (1.0,)
    family = "poisson-rate"

    def __post_init__(self):
        knots = tuple(float(k) for k in self.knots)
        left = tuple(float(v) for v in self.left)
        right = tuple(float(v) for v in self.right)
        if len(knots) < 2 or knots[0] != 0.0 or any(b <= a for a, b in zip(knots, knots[1:])):
            raise InvalidModel("knots must start at 0 and increase strictly")
        if len(left) != len(knots) - 1 or len(right) != len(left):
            raise InvalidModel("need one (left, right) rate pair per segment")
        if min(left + right) < 0:
            raise InvalidModel("rates must be nonnegative")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "support_end", knots[-1])
        k = np.array(knots)
        a, b = np.array(left), np.array(right)
        h = np.diff(k)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (a + b) * h)])
        if cum[-1] <= 0.0:
            raise InvalidModel("cumulative rate over the horizon is zero")
        object.__setattr__(self, "_k", k)
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_slope", (b - a) / h)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def piecewise_constant(cls, edges: Sequence[float], rates: Sequence[float]) -> "PoissonRate":
        """Rates ``rates[j]`` on ``[edges[j], edges[j+1])``; ``edges[0]`` must be 0."""
        return cls(tuple(edges), tuple(rates), tuple(rates))

    @classmethod
    def piecewise_linear(cls, knots: Sequence[float], values: Sequence[float]) -> "PoissonRate":
        """Continuous rate interpolating ``values`` at ``knots``."""
        return cls(tuple(knots), tuple(values[:-1]), tuple(values[1:]))

    @property
    def horizon(self) -> float:
        return self.knots[-1]

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        j = np.clip(np.searchsorted(self._k, t, side="right") - 1, 0, len(self._a) - 1)
        return self._a[j] + self._slope[j] * (t - self._k[j])

    def cumulative_rate(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.horizon)
        j = np.clip(np.searchsorted(self._k, t, side="right") - 1, 0, len(self._a) - 1)
        x = t - self._k[j]
        return self._cum[j] + self._a[j] * x + 0.5 * self._slope[j] * x * x

    def cumulative_rate_inverse(self, y):
        """Smallest ``t`` with ``G(t) >= y`` for ``y`` in ``[0, G(H)]``."""
        y = np.asarray(y, dtype=float)
        j = np.clip(np.searchsorted(self._cum, y, side="left") - 1, 0, len(self._a) - 1)
        r = y - self._cum[j]
        a, c = self._a[j], 0.5 * self._slope[j]
        disc = np.sqrt(np.maximum(a * a + 4.0 * c * r, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(r > 0, 2.0 * r / (a + disc), 0.0)
        return np.minimum(self._k[j] + x, self.horizon)

    def cdf(self, t):
        return self.cumulative_rate(t) / self._cum[-1]

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= 0) & (t <= self.horizon), self.rate(t), 0.0) / self._cum[-1]

    def integrated_hazard(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        for idx, s in np.ndenumerate(t):
            out[idx] = self._integrated_hazard_scalar(float(s))
        return out if out.ndim else float(out)

    def _integrated_hazard_scalar(self, t: float) -> float:
        if t >= self.horizon:
            return math.inf

        def haz(s):
            return float(self.pdf(s) / (1.0 - self.cdf(s)))

        total = 0.0
        lo = 0.0
        # integrate segment by segment so the integrand is smooth on every panel
        for k in self.knots[1:]:
            hi = min(k, t)
            if hi > lo:
                total += adaptive_simpson(haz, lo, hi, QUAD_TOL / len(self.knots))
            lo = k
            if k >= t:
                break
        return total

    def ppf(self, u):
        return self.cumulative_rate_inverse(np.asarray(u, dtype=float) * self._cum[-1])

    def mean(self):
        return float(adaptive_simpson(lambda s: float(1.0 - self.cdf(s)), 0.0, self.horizon))

    def scaled(self, factor):
        knots = tuple(k * factor for k in self.knots)
        return PoissonRate(knots, self.left, self.right)

    def spec(self):
        if self.left == self.right:
            body = ",".join(f"{e!r}:{r!r}" for e, r in zip(self.knots[1:], self.left))
            return f"steps:{body}"
        if self.left[1:] == self.right[:-1]:
            vals = self.left + (self.right[-1],)
            body = ",".join(f"{k!r}:{v!r}" for k, v in zip(self.knots, vals))
            return f"rate:{body}"
        raise InvalidModel("discontinuous piecewise-linear rate has no string form")


def parse_model(text: str) -> InterarrivalModel:
    """Parse ``exp:<rate>``, ``unif:<b>``, ``gamma:<shape>,<scale>``,
    ``steps:<end>:<rate>,...`` (piecewise-constant rate) or
    ``rate:<t>:<value>,...`` (piecewise-linear rate through the points, first t = 0).
    """
    name, _, body = text.strip().partition(":")
    name = name.lower()
    try:
        if name in ("exp", "exponential"):
            return Exponential(float(body))
        if name in ("unif", "uniform"):
            return Uniform(float(body))
        if name == "gamma":
            shape, scale = (float(x) for x in body.split(","))
            return Gamma(shape, scale)
        if name == "steps":
            pairs = [p.split(":") for p in body.split(",")]
            ends = [float(e) for e, _ in pairs]
            return PoissonRate.piecewise_constant([0.0] + ends, [float(r) for _, r in pairs])
        if name == "rate":
            pairs = [p.split(":") for p in body.split(",")]
            return PoissonRate.piecewise_linear([float(k) for k, _ in pairs],
                                                [float(v) for _, v in pairs])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidModel):
            raise
        raise InvalidModel(f"cannot parse model {text!r}: {exc}") from None
    raise InvalidModel(f"unknown model family in {text!r}")


_WHICH = ("cdf", "density", "hazard", "integrated_hazard", "inverse_cdf")


def distribution_eval(model: InterarrivalModel, t: float, which: str) -> float:
    """Scalar evaluation of one distributional functional of ``model`` at ``t``."""
    if which not in _WHICH:
        raise ValueError(f"which must be one of {_WHICH}")
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise DomainError(f"argument must be finite and nonnegative, got {t}")
    if which == "inverse_cdf":
        if t > 1.0 or (t == 1.0 and math.isinf(model.support_end)):
            raise DomainError("inverse cdf needs u in [0, 1) for unbounded support")
        return float(model.ppf(t))
    if which == "cdf":
        return float(model.cdf(t))
    if which == "density":
        return float(model.pdf(t))
    if which == "hazard":
        return float(model.hazard(t))
    return float(model.integrated_hazard(t))


def _readonly(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class StepPath:
    """Right-continuous piecewise-constant path on ``[0, horizon]``.

    Value is ``initial_value`` before the first jump and ``post_jump_values[k]``
    on ``[jump_epochs[k], jump_epochs[k+1])``.
    """

    initial_value: float
    jump_epochs: np.ndarray
    post_jump_values: np.ndarray
    horizon: float = 1.0

    def __post_init__(self):
        epochs = _readonly(self.jump_epochs)
        values = _readonly(self.post_jump_values)
        object.__setattr__(self, "jump_epochs", epochs)
        object.__setattr__(self, "post_jump_values", values)
        object.__setattr__(self, "initial_value", float(self.initial_value))
        object.__setattr__(self, "horizon", float(self.horizon))
        if epochs.shape != values.shape:
            raise ValueError("jump_epochs and post_jump_values must have equal length")
        if epochs.size:
            if np.any(np.diff(epochs) <= 0):
                raise ValueError("jump epochs must be strictly increasing")
            if epochs[0] < 0 or epochs[-1] > self.horizon:
                raise ValueError("jump epochs must lie in [0, horizon]")

    def __len__(self):
        return self.jump_epochs.size

    def _check(self, t: np.ndarray):
        if np.any(~(t >= 0)) or np.any(t > self.horizon):
            raise DomainError(f"path evaluated outside [0, {self.horizon}]")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        self._check(t)
        idx = np.searchsorted(self.jump_epochs, t, side="right")
        out = self.sequence()[idx]
        return out if out.ndim else float(out)

    def sequence(self) -> np.ndarray:
        """Initial value followed by the post-jump values."""
        return np.concatenate([[self.initial_value], self.post_jump_values])

    def left_limit(self, t):
        t = np.asarray(t, dtype=float)
        self._check(t)
        idx = np.searchsorted(self.jump_epochs, t, side="left")
        out = self.sequence()[idx]
        return out if out.ndim else float(out)

    def with_values(self, initial_value: float, post_jump_values) -> "StepPath":
        return StepPath(initial_value, self.jump_epochs, post_jump_values, self.horizon)

    def __eq__(self, other):
        if not isinstance(other, StepPath):
            return NotImplemented
        return (self.horizon == other.horizon
                and self.initial_value == other.initial_value
                and np.array_equal(self.jump_epochs, other.jump_epochs)
                and np.array_equal(self.post_jump_values, other.post_jump_values))

    __hash__ = None


def step_path_eval(path: StepPath, t: float) -> float:
    return float(path(float(t)))


def step_path_sup_neg(path: StepPath, t: float) -> float:
    """``sup_{0<=s<=t} (-path(s))_+``, exact over the values the path takes on ``[0, t]``."""
    t = float(t)
    if not (0.0 <= t <= path.horizon):
        raise DomainError(f"t={t} outside [0, {path.horizon}]")
    k = int(np.searchsorted(path.jump_epochs, t, side="right"))
    seq = path.sequence()[: k + 1]
    if path.jump_epochs.size and path.jump_epochs[0] == 0.0:
        seq = seq[1:]   # initial value is never taken when the first jump sits at 0
    worst = float(np.max(-seq))
    return worst if worst > 0.0 else 0.0


@dataclass(frozen=True, eq=False)
class GridPath:
    """Path sampled at ``horizon * i / m`` for ``i = 0..m``."""

    values: np.ndarray
    horizon: float = 1.0

    def __post_init__(self):
        values = _readonly(self.values)
        if values.size < 2:
            raise ValueError("a grid path needs at least two points (m >= 1)")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def m(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return grid_times(self.m, self.horizon)

    def at(self, t):
        """Value at the grid point nearest to ``t``."""
        t = np.asarray(t, dtype=float)
        i = np.rint(t / self.horizon * self.m).astype(int)
        if np.any((i < 0) | (i > self.m)):
            raise DomainError("time outside the grid")
        return self.values[i]

    def __eq__(self, other):
        if not isinstance(other, GridPath):
            return NotImplemented
        return self.horizon == other.horizon and np.array_equal(self.values, other.values)

    __hash__ = None


def grid_times(m: int, horizon: float = 1.0) -> np.ndarray:
    """Uniform grid with exact endpoints ``0`` and ``horizon``."""
    if m < 1:
        raise ValueError("grid size must be at least 1")
    return (np.arange(m + 1) / m) * horizon


@dataclass(frozen=True)
class RandomStream:
    """Named, reproducible source of randomness.

    Identical ``(seed, stream_index, path)`` give bit-identical draws; the
    underlying ``SeedSequence`` spawn key makes distinct indices independent.
    ``path`` distinguishes sub-streams of one replication (e.g. arrivals vs services).
    """

    seed: int
    stream_index: int = 0
    path: tuple = field(default=())

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed),
                                     spawn_key=(int(self.stream_index),) + tuple(self.path))
        return np.random.Generator(np.random.PCG64(seq))

    def substream(self, *keys: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_index, tuple(self.path) + tuple(keys))
