"""Statistical test kernel against brute-force and closed-form oracles."""
import math

import numpy as np
import pytest
from scipy import stats as sps

from transitory_sim.stats import (
    DataError,
    chi_square_gof,
    covariance_and_se,
    kolmogorov_sf,
    ks_one_sample,
    ks_two_sample,
    mean_and_se,
    pool_bins,
    variance_and_se,
)


def uniform_cdf(x):
    return np.clip(x, 0.0, 1.0)


def brute_force_ks(samples, cdf):
    """sup |F_N - F| by checking both sides of every jump."""
    x = np.sort(samples)
    N = x.size
    best = 0.0
    for i, v in enumerate(x):
        best = max(best, abs((i + 1) / N - cdf(v)), abs(i / N - cdf(v)))
    return best


def test_single_point_against_uniform():
    D, _ = ks_one_sample(np.full(5, 0.5), uniform_cdf)
    assert D == 0.5


def test_deciles_match_brute_force_enumeration():
    x = np.arange(1, 10) / 10
    D, _ = ks_one_sample(x, uniform_cdf)
    assert D == pytest.approx(brute_force_ks(x, uniform_cdf), abs=1e-15)
    assert D == pytest.approx(0.1, abs=1e-15)


def test_kolmogorov_sf_matches_reference():
    for x in (0.3, 0.6, 0.9, 1.0, 1.36, 1.95, 3.0):
        assert kolmogorov_sf(x) == pytest.approx(sps.kstwobign.sf(x), abs=1e-10)
    assert kolmogorov_sf(0.0) == 1.0


def test_ks_one_sample_p_value_matches_reference_asymptotics():
    x = np.random.default_rng(0).random(500)
    D, p = ks_one_sample(x, uniform_cdf)
    assert D == pytest.approx(sps.kstest(x, "uniform").statistic, abs=1e-15)
    assert p == pytest.approx(sps.kstwobign.sf(math.sqrt(500) * D), abs=1e-10)


def test_two_sample_identical_and_disjoint():
    a = np.random.default_rng(1).random(50)
    assert ks_two_sample(a, a)[0] == 0.0
    assert ks_two_sample(np.zeros(5), np.ones(5))[0] == 1.0


def test_two_sample_statistic_matches_reference():
    g = np.random.default_rng(2)
    a, b = g.normal(size=300), g.normal(0.2, size=200)
    assert ks_two_sample(a, b)[0] == pytest.approx(sps.ks_2samp(a, b).statistic, abs=1e-15)


def test_too_few_or_nonfinite_samples():
    with pytest.raises(DataError):
        ks_one_sample([0.1, 0.2], uniform_cdf)
    with pytest.raises(DataError):
        ks_one_sample([0.1, 0.2, 0.3, 0.4, math.nan], uniform_cdf)
    with pytest.raises(DataError):
        ks_two_sample([1, 2, 3, 4, math.inf], [1, 2, 3, 4, 5])


def test_chi_square_exact_proportions():
    stat, p = chi_square_gof([25, 50, 25], [0.25, 0.5, 0.25])
    assert stat == 0.0 and p == 1.0


def test_chi_square_matches_reference():
    counts = np.array([18, 32, 27, 23])
    stat, p = chi_square_gof(counts, [0.25] * 4)
    ref = sps.chisquare(counts)
    assert stat == pytest.approx(ref.statistic, abs=1e-12)
    assert p == pytest.approx(ref.pvalue, abs=1e-12)


def test_chi_square_off_by_one_is_rejected():
    n = 10
    pmf = np.array([math.comb(n, k) for k in range(n + 1)]) / 2 ** n
    counts = np.random.default_rng(3).binomial(n, 0.5, size=100_000)
    hist = np.bincount(counts, minlength=n + 1)
    assert chi_square_gof(hist, pmf)[1] > 1e-3
    shifted = np.concatenate([[0.0], pmf[:-1]])
    shifted[-1] += pmf[-1]
    assert chi_square_gof(hist, shifted)[1] < 1e-6


def test_chi_square_empty_histogram():
    with pytest.raises(DataError):
        chi_square_gof([0, 0, 0], [0.2, 0.3, 0.5])
    with pytest.raises(ValueError):
        chi_square_gof([1, 2], [0.3, 0.3])


def test_pool_bins_merges_tails():
    obs, exp = pool_bins([1, 2, 50, 40, 3, 1], [1.0, 3.0, 50.0, 40.0, 4.0, 2.0])
    assert exp.min() >= 5
    assert obs.sum() == 97 and exp.sum() == 100
    assert exp.tolist() == [54.0, 40.0, 6.0]
    assert pool_bins([9, 1], [9.0, 1.0])[1].tolist() == [10.0]   # short tail folded back


def test_moment_standard_errors_are_honest():
    g = np.random.default_rng(4)
    x = g.normal(1.0, 2.0, size=20000)
    m, se = mean_and_se(x)
    v, vse = variance_and_se(x)
    assert abs(m - 1.0) < 4 * se
    assert se == pytest.approx(2 / math.sqrt(20000), rel=0.05)
    assert abs(v - 4.0) < 4 * vse
    assert vse == pytest.approx(math.sqrt(2 * 16 / 20000), rel=0.05)
    y = x + g.normal(size=x.size)
    c, cse = covariance_and_se(x, y)
    assert abs(c - 4.0) < 4 * cse


@pytest.mark.slow
def test_meta_calibration_of_ks_and_chi_square():
    """At the 0.001 level each test rejects its own null in at most 0.5% of 1000 meta-replications."""
    g = np.random.default_rng(5)
    reps = 1000
    rej_one = sum(ks_one_sample(g.random(100_000), uniform_cdf)[1] < 1e-3 for _ in range(reps))
    rej_two = sum(ks_two_sample(g.random(1000), g.random(1000))[1] < 1e-3 for _ in range(reps))
    pmf = np.array([math.comb(10, k) for k in range(11)]) / 1024
    rej_chi = sum(
        chi_square_gof(np.bincount(g.binomial(10, 0.5, 20000), minlength=11), pmf)[1] < 1e-3
        for _ in range(reps))
    assert rej_one <= 5 and rej_two <= 5 and rej_chi <= 5
