"""One-sided reflection (Skorokhod regulator), the transitory-queue netput and
workload, and the unconditioned heavy-traffic netput used for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import kernels
from .core import Exponential, GridPath, InterarrivalModel, InvalidModel, RandomStream, StepPath
from .samplers import ConditionedRow

__all__ = [
    "ServiceModel",
    "parse_service",
    "HeavyTrafficSpec",
    "regulator",
    "reflect",
    "netput_gamma_n",
    "workload",
    "ht_netput",
    "ht_drift",
]

Path = Union[StepPath, GridPath]

SERVICE_FAMILIES = ("exponential", "deterministic", "lognormal")


@dataclass(frozen=True)
class ServiceModel:
    """Service-time law with mean ``scale`` (1 unless rescaled) and known variance.

    ``sigma2`` is the variance of the unit-mean law: 1 for exponential, 0 for
    deterministic, and a free parameter for lognormal.
    """

    family: str = "exponential"
    sigma2: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in SERVICE_FAMILIES:
            raise InvalidModel(f"service family must be one of {SERVICE_FAMILIES}")
        if self.family == "exponential" and self.sigma2 != 1.0:
            raise InvalidModel("a unit-mean exponential has variance 1")
        if self.family == "deterministic" and self.sigma2 != 0.0:
            raise InvalidModel("a deterministic service time has variance 0")
        if self.sigma2 < 0 or not self.scale > 0:
            raise InvalidModel("variance must be nonnegative and scale positive")

    @classmethod
    def exponential(cls):
        return cls("exponential", 1.0)

    @classmethod
    def deterministic(cls):
        return cls("deterministic", 0.0)

    @classmethod
    def lognormal(cls, sigma2: float):
        return cls("lognormal", sigma2)

    @property
    def mean(self) -> float:
        return self.scale

    @property
    def variance(self) -> float:
        return self.scale ** 2 * self.sigma2

    def scaled(self, factor: float) -> "ServiceModel":
        return ServiceModel(self.family, self.sigma2, self.scale * factor)

    def sample(self, gen: np.random.Generator, size) -> np.ndarray:
        if self.family == "deterministic":
            return np.full(size, self.scale)
        if self.family == "exponential":
            return self.scale * -np.log1p(-gen.random(size))
        s2 = math.log1p(self.sigma2)
        return self.scale * np.exp(-0.5 * s2 + math.sqrt(s2) * gen.standard_normal(size))

    def spec(self) -> str:
        if self.family == "lognormal":
            return f"lognormal:{self.sigma2!r}"
        return {"exponential": "exp", "deterministic": "det"}[self.family]


def parse_service(text: str) -> ServiceModel:
    """``exp``, ``det`` or ``lognormal:<variance>``."""
    name, _, body = text.strip().partition(":")
    name = name.lower()
    if name in ("exp", "exponential"):
        return ServiceModel.exponential()
    if name in ("det", "deterministic"):
        return ServiceModel.deterministic()
    if name == "lognormal":
        try:
            return ServiceModel.lognormal(float(body))
        except ValueError:
            raise InvalidModel(f"cannot parse service model {text!r}") from None
    raise InvalidModel(f"unknown service family in {text!r}")


@dataclass(frozen=True)
class HeavyTrafficSpec:
    """n-th system of the heavy-traffic sequence: arrival rate ``n``, service rate ``n - theta sqrt(n)``.

    ``interarrival`` must have mean 1; the unit-mean ``service`` law is rescaled to
    mean ``n / (n - theta sqrt(n))``.
    """

    theta: float
    n: int
    interarrival: InterarrivalModel = field(default_factory=lambda: Exponential(1.0))
    service: ServiceModel = field(default_factory=ServiceModel.exponential)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not self.service_rate > 0:
            raise InvalidModel("need n - theta * sqrt(n) > 0")
        if abs(self.interarrival.mean() - 1.0) > 1e-9:
            raise InvalidModel("heavy-traffic interarrival law must have mean 1")
        if self.service.scale != 1.0:
            raise InvalidModel("pass the unit-mean service law; it is rescaled internally")

    @property
    def arrival_rate(self) -> float:
        return float(self.n)

    @property
    def service_rate(self) -> float:
        return self.n - self.theta * math.sqrt(self.n)

    @property
    def load(self) -> float:
        return self.arrival_rate / self.service_rate

    @property
    def scaled_service(self) -> ServiceModel:
        return self.service.scaled(self.n / self.service_rate)


def ht_drift(n: int, theta: float) -> float:
    """``n^{3/2} (1/mu_n - 1/lambda_n)`` with ``lambda_n = n`` and ``mu_n = n - theta sqrt(n)``."""
    mu = n - theta * math.sqrt(n)
    return n ** 1.5 * (1.0 / mu - 1.0 / n)


def _neg_sup_step(path: StepPath) -> np.ndarray:
    seq = path.sequence()
    if path.jump_epochs.size and path.jump_epochs[0] == 0.0:
        # the initial value is never taken; keep it out of the running supremum
        return np.concatenate([kernels.running_neg_sup(seq[:1]),
                               kernels.running_neg_sup(seq[1:])])
    return kernels.running_neg_sup(seq)


def regulator(path: Path) -> Path:
    """``Psi(path)(t) = sup_{s<=t} (-path(s))_+``.

    Exact for step paths (running supremum over the values taken, which are
    all the candidates); running maximum over grid values for grid paths.
    """
    if isinstance(path, StepPath):
        psi = _neg_sup_step(path)
        return path.with_values(psi[0], psi[1:])
    if isinstance(path, GridPath):
        return GridPath(kernels.running_neg_sup(path.values), path.horizon)
    raise TypeError("regulator expects a StepPath or GridPath")


def reflect(path: Path) -> Path:
    """``Phi(path) = path + Psi(path)``: nonnegative and the smallest such push."""
    if isinstance(path, StepPath):
        seq = path.sequence()
        phi = seq + _neg_sup_step(path)
        return path.with_values(phi[0], phi[1:])
    if isinstance(path, GridPath):
        return GridPath(kernels.reflect_rows(path.values), path.horizon)
    raise TypeError("reflect expects a StepPath or GridPath")


def netput_gamma_n(row: ConditionedRow, services, n: int) -> StepPath:
    """Customer-indexed netput ``(1/n) sum_{i<=nt} nu_i - sum_{i<=nt} xi_i`` on ``[0, 1]``.

    Jumps sit at ``i/n``, one per customer, not at arrival clock times.
    """
    services = np.asarray(services, dtype=float).reshape(-1)
    if n != row.n:
        raise ValueError("n must match the row")
    if services.size != n:
        raise ValueError(f"expected {n} service times, got {services.size}")
    values = np.cumsum(services) / n - row.epochs
    return StepPath(0.0, np.arange(1, n + 1) / n, values, 1.0)


def workload(row: ConditionedRow, services, n: int) -> StepPath:
    """Transitory-queue workload ``Phi(Gamma_n)``."""
    return reflect(netput_gamma_n(row, services, n))


def ht_netput(spec: HeavyTrafficSpec, stream: RandomStream) -> StepPath:
    """Heavy-traffic netput from unconditioned i.i.d. service and interarrival times.

    Evaluates, at ``t = i/n``,
    ``((1/n) sum nu - nt/mu_n) - ((1/n) sum xi - nt/lambda_n) + nt (1/mu_n - 1/lambda_n)``.
    The three affine terms cancel identically, so the path is constant between
    the jumps at ``i/n``; the centred form is kept so each bracket stays small.
    """
    n = spec.n
    nu = spec.scaled_service.sample(stream.substream(0).generator(), n)
    xi = spec.interarrival.ppf(stream.substream(1).generator().random(n))
    t = np.arange(1, n + 1) / n
    lam, mu = spec.arrival_rate, spec.service_rate
    values = ((np.cumsum(nu) / n - n * t / mu)
              - (np.cumsum(xi) / n - n * t / lam)
              + n * t * (1.0 / mu - 1.0 / lam))
    return StepPath(0.0, t, values, 1.0)
