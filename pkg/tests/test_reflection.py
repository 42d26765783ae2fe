"""Reflection map, transitory netput/workload and the heavy-traffic comparator."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transitory_sim.core import Exponential, GridPath, InvalidModel, RandomStream, StepPath
from transitory_sim.reflection import (
    HeavyTrafficSpec,
    ServiceModel,
    ht_drift,
    ht_netput,
    netput_gamma_n,
    parse_service,
    reflect,
    regulator,
    workload,
)
from transitory_sim.samplers import conditioned_rows


def lindley_workload(row, services):
    """Customer-indexed workload by the Lindley-type recursion W_k = max(W_{k-1} + nu_k/n - xi_k, 0)."""
    n = row.n
    out, w, floor = [], 0.0, 0.0
    # Phi(Gamma)(k/n) = Gamma_k + max(0, max_j -Gamma_j); computed incrementally as a check
    g = 0.0
    for k in range(n):
        g += services[k] / n - row.xi[k]
        floor = max(floor, -g)
        w = g + floor
        out.append(w)
    return np.array(out)


def test_reflect_examples():
    p = StepPath(0.0, [0.2, 0.5, 0.8], [-1.0, 0.5, -2.0], 1.0)
    phi = reflect(p)
    psi = regulator(p)
    assert phi.sequence().tolist() == [0.0, 0.0, 1.5, 0.0]
    assert psi.sequence().tolist() == [0.0, 1.0, 1.0, 2.0]


def test_reflect_nonnegative_path_is_identity():
    p = StepPath(0.5, [0.2, 0.5], [1.0, 0.3], 1.0)
    assert reflect(p) == p
    assert np.all(regulator(p).sequence() == 0.0)


def test_reflect_grid_path():
    g = GridPath(np.array([0.0, -1.0, 0.5, -2.0, 1.0]))
    assert reflect(g).values.tolist() == [0.0, 0.0, 1.5, 0.0, 3.0]


def test_workload_matches_lindley_recursion():
    rows = conditioned_rows(Exponential(50.0), 50, 1.0, seed=3, indices=range(20))
    gen = np.random.default_rng(1)
    for row in rows:
        nu = gen.exponential(1.0, 50)
        W = workload(row, nu, 50)
        np.testing.assert_allclose(W.post_jump_values, lindley_workload(row, nu), rtol=0, atol=1e-13)


def test_netput_checks_sizes():
    row = conditioned_rows(Exponential(5.0), 5, 1.0, seed=1, indices=[0])[0]
    with pytest.raises(ValueError):
        netput_gamma_n(row, np.ones(4), 5)
    with pytest.raises(ValueError):
        netput_gamma_n(row, np.ones(5), 6)


def _random_step_path(gen):
    k = int(gen.integers(0, 51))
    epochs = np.sort(gen.choice(np.arange(1, 10**6), size=k, replace=False)) / 10**6
    return StepPath(float(gen.normal()), epochs, gen.normal(size=k).cumsum(), 1.0)


def test_candidate_scan_equals_dense_grid_running_max():
    gen = np.random.default_rng(11)
    for _ in range(100):
        p = _random_step_path(gen)
        grid = np.union1d(np.linspace(0, 1, 2001), p.jump_epochs)
        dense = GridPath(p(grid)).values
        running = np.maximum.accumulate(np.maximum(0.0, -dense))
        assert np.array_equal(reflect(p)(grid), dense + running)
        assert np.array_equal(regulator(p)(grid), running)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reflection_invariants(seed):
    gen = np.random.default_rng(seed)
    p = _random_step_path(gen)
    phi, psi = reflect(p).sequence(), regulator(p).sequence()
    g = p.sequence()
    assert np.all(phi >= 0) and np.all(phi >= g)
    assert np.all(np.diff(psi) >= 0)
    assert psi[0] == max(0.0, -g[0])
    # complementarity: the regulator only increases where the reflected path sits at zero
    up = np.flatnonzero(np.diff(psi) > 0) + 1
    assert np.all(phi[up] == 0.0)


def test_service_models():
    gen = np.random.default_rng(2)
    for spec, var in (("exp", 1.0), ("det", 0.0), ("lognormal:0.5", 0.5)):
        s = parse_service(spec)
        x = s.sample(gen, 200_000)
        assert s.variance == var and s.spec() == spec
        assert abs(x.mean() - 1) < 5 * math.sqrt(var / x.size) + 1e-12
        if var:
            assert abs(x.var() - var) < 0.05 * var
    with pytest.raises(InvalidModel):
        parse_service("weibull")
    with pytest.raises(InvalidModel):
        ServiceModel("exponential", 2.0)


def test_heavy_traffic_drift():
    assert ht_drift(10**4, 0.5) == pytest.approx(0.5, rel=0.01)
    assert ht_drift(10**4, -0.5) == pytest.approx(-0.5, rel=0.01)
    assert ht_drift(500, 0.0) == 0.0


def test_heavy_traffic_deterministic_netput_vanishes():
    class Unit(Exponential):
        def ppf(self, u):
            return np.ones_like(np.asarray(u, dtype=float))

    spec = HeavyTrafficSpec(0.0, 200, Unit(1.0), ServiceModel.deterministic())
    g = ht_netput(spec, RandomStream(0))
    assert np.max(np.abs(g.sequence())) <= 2 / 200


def test_heavy_traffic_spec_validation():
    s = HeavyTrafficSpec(0.5, 100)
    assert s.service_rate == 95.0 and s.load == pytest.approx(100 / 95)
    with pytest.raises(InvalidModel):
        HeavyTrafficSpec(20.0, 100)
    with pytest.raises(InvalidModel):
        HeavyTrafficSpec(0.0, 100, Exponential(2.0))
