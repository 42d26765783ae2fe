"""Conditioned renewal processes, their Brownian-bridge limits, and the
workload of a transitory single-server queue."""
from .core import (
    DomainError,
    Exponential,
    Gamma,
    GridPath,
    InterarrivalModel,
    InvalidModel,
    PoissonRate,
    RandomStream,
    StepPath,
    TimeHorizon,
    Uniform,
    distribution_eval,
    parse_model,
    step_path_eval,
    step_path_sup_neg,
)
from .kernels import BACKEND
from .samplers import (
    AcceptanceTooLow,
    ConditionedPoissonSample,
    ConditionedRow,
    conditional_mean_mu_n,
    estimate_acceptance,
    exchangeability_diagnostic,
    sample_conditioned_poisson_os,
    sample_conditioned_renewal_rejection,
    sample_iid_renewal,
)

__version__ = "0.1.0"
