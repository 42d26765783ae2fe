"""Conditioned samplers and the conditional mean interarrival time."""
import math

import numpy as np
import pytest

from transitory_sim.core import Exponential, Gamma, InvalidModel, RandomStream, Uniform, parse_model
from transitory_sim.samplers import (
    AcceptanceTooLow,
    ConditionedPoissonSample,
    ConditionedRow,
    conditional_mean_mu_n,
    conditioned_rows,
    estimate_acceptance,
    exchangeability_diagnostic,
    sample_conditioned_poisson_os,
    sample_conditioned_poisson_os_batch,
    sample_conditioned_renewal_rejection,
    sample_iid_renewal,
)
from transitory_sim.stats import ks_two_sample


def poisson_pmf(k, lam):
    return math.exp(-lam) * lam ** k / math.factorial(k)


# -- conditional mean -----------------------------------------------------------

@pytest.mark.parametrize("n", [0, 1, 9, 99, 999])
def test_mu_n_exponential_closed_form(n):
    assert conditional_mean_mu_n(Exponential(1.0), n, 1.0) == pytest.approx(1 / (n + 1), abs=1e-8)


def test_mu_n_does_not_depend_on_exponential_rate():
    assert conditional_mean_mu_n(Exponential(37.0), 4, 2.0) == pytest.approx(2.0 / 5, abs=1e-9)


def test_mu_n_zero_is_horizon():
    assert conditional_mean_mu_n(Gamma(2.0, 1.0), 0, 1.7) == 1.7


def test_mu_n_uniform_by_direct_quadrature():
    # Lambda(u) = -log(1-u/b); mu_n = int_0^T (1 - log(1-u/b)/log(1-T/b))^n du
    b, T, n = 2.0, 1.0, 3
    grid = np.linspace(0, T, 200001)
    f = (1 - np.log1p(-grid / b) / math.log1p(-T / b)) ** n
    trap = float(np.sum((f[1:] + f[:-1]) * np.diff(grid)) / 2)
    assert conditional_mean_mu_n(Uniform(b), n, T) == pytest.approx(trap, abs=1e-9)


def test_mu_n_invalid_inputs():
    with pytest.raises(ValueError):
        conditional_mean_mu_n(Exponential(1.0), -1, 1.0)
    with pytest.raises(InvalidModel):
        conditional_mean_mu_n(Uniform(1.0), 2, 1.0)   # Lambda(T) infinite


# -- rejection sampler ------------------------------------------------------------

def test_rejection_rows_satisfy_conditioning_event():
    model = Exponential(8.0)
    for i in range(50):
        row, attempts = sample_conditioned_renewal_rejection(model, 8, 1.0, RandomStream(3, i))
        S = row.partial_sums
        assert S[7] <= 1.0 < S[8]
        assert attempts >= 1
        assert np.all(np.diff(row.epochs) > 0)


def test_rejection_is_reproducible():
    a, na = sample_conditioned_renewal_rejection(Gamma(2.0, 0.05), 10, 1.0, RandomStream(11, 5))
    b, nb = sample_conditioned_renewal_rejection(Gamma(2.0, 0.05), 10, 1.0, RandomStream(11, 5))
    assert np.array_equal(a.xi, b.xi) and na == nb


def test_rejection_gives_up_with_acceptance_estimate():
    with pytest.raises(AcceptanceTooLow) as info:
        sample_conditioned_renewal_rejection(Exponential(1e-3), 50, 1.0, RandomStream(0), max_attempts=1000)
    assert info.value.attempts == 1000
    assert info.value.estimate == 0.0
    assert "n=50" in str(info.value)


def test_conditioned_rows_from_independent_streams():
    rows = conditioned_rows(Exponential(5.0), 5, 1.0, seed=9, indices=range(4))
    assert len({r.xi.tobytes() for r in rows}) == 4


def test_conditioned_row_validation():
    with pytest.raises(ValueError):
        ConditionedRow(2, 1.0, [0.5, 0.6, 0.1])   # S_2 > T
    with pytest.raises(ValueError):
        ConditionedRow(2, 1.0, [0.5, 0.2])        # wrong length
    ConditionedRow(2, 1.0, [0.5, 0.5, 0.1])       # S_2 == T is allowed


def test_estimate_acceptance_matches_poisson_pmf():
    p, se = estimate_acceptance(Exponential(10.0), 10, 1.0, RandomStream(1), 200_000)
    assert abs(p - poisson_pmf(10, 10.0)) < 4 * se


def test_iid_renewal_counts_are_poisson_mean():
    counts = [sample_iid_renewal(Exponential(3.0), 2.0, RandomStream(4, i))[1] for i in range(3000)]
    m = np.mean(counts)
    assert abs(m - 6.0) < 4 * math.sqrt(6.0 / 3000)


# -- order-statistics sampler ------------------------------------------------------

def test_os_sample_epochs_are_sorted_inside_horizon():
    s = sample_conditioned_poisson_os(parse_model("rate:0:0,1:2"), 20, 1.0, RandomStream(2))
    assert isinstance(s, ConditionedPoissonSample)
    assert s.epochs.size == 20
    assert np.all(np.diff(s.epochs) > 0) and 0 < s.epochs[0] and s.epochs[-1] < 1


def test_os_sample_marginal_follows_time_change():
    # with F(t) = t^2 each epoch, sampled at random, is F-distributed: E[F(U)] = 1/2
    e = sample_conditioned_poisson_os_batch(parse_model("rate:0:0,1:2"), 5, 1.0, RandomStream(3), 20000)
    u = (e ** 2).ravel()
    assert abs(u.mean() - 0.5) < 4 * math.sqrt(1 / 12 / u.size)


def test_os_sampler_needs_rate_model():
    with pytest.raises(InvalidModel):
        sample_conditioned_poisson_os(Gamma(2.0, 1.0), 3, 1.0, RandomStream(0))
    with pytest.raises(InvalidModel):
        sample_conditioned_poisson_os(parse_model("rate:0:1,1:1"), 3, 2.0, RandomStream(0))


def test_rejection_and_os_samplers_agree_for_poisson():
    rej = np.array([sample_conditioned_renewal_rejection(Exponential(10.0), 10, 1.0, RandomStream(6, i))[0].epochs
                    for i in range(3000)])
    os_ = sample_conditioned_poisson_os_batch(Exponential(10.0), 10, 1.0, RandomStream(7), 3000)
    for k in (0, 4, 9):
        assert ks_two_sample(rej[:, k], os_[:, k])[1] > 1e-3


# -- exchangeability ---------------------------------------------------------------

def test_exchangeability_same_index_is_trivial():
    rows = conditioned_rows(Exponential(5.0), 5, 1.0, seed=1, indices=range(10))
    assert exchangeability_diagnostic(rows, 2, 2) == (0.0, 1.0)


def test_exchangeability_of_first_and_last():
    rows = conditioned_rows(Gamma(2.0, 0.05), 10, 1.0, seed=2, indices=range(2000))
    assert exchangeability_diagnostic(rows, 1, 10)[1] > 1e-3
    with pytest.raises(ValueError):
        exchangeability_diagnostic(rows, 0, 10)
