"""Compiled and pure-Python kernels agree bit for bit, and both agree with loop oracles."""
import numpy as np
import pytest

from transitory_sim import kernels

BACKENDS = kernels.backends()


def _oracle_accept(row, n, T):
    s, prev = 0.0, 0.0
    for k in range(n):
        s += row[k]
        if not s > prev:
            return False
        prev = s
    return s <= T < s + row[n]


def _oracle_neg_sup(v):
    out, best = [], 0.0
    for x in v:
        best = max(best, max(0.0, -x))
        out.append(best)
    return np.array(out)


@pytest.fixture(params=sorted(BACKENDS))
def impl(request):
    return BACKENDS[request.param]


def test_active_backend_is_reported():
    assert kernels.BACKEND in BACKENDS
    assert "python" in BACKENDS


def test_accept_mask_matches_loop_oracle(impl):
    gen = np.random.default_rng(1)
    n, T = 6, 1.0
    xi = gen.exponential(1.0 / n, size=(400, n + 1))
    xi[3, 2] = 0.0                                   # non-strict partial sums: reject
    expected = np.array([_oracle_accept(r, n, T) for r in xi])
    assert np.array_equal(impl.accept_mask(xi, n, T), expected)
    hits = np.flatnonzero(expected)
    assert impl.first_accepted(xi, n, T) == (hits[0] if hits.size else -1)


def test_accept_boundary_cases(impl):
    # S_n == T is accepted, S_{n+1} == T is not
    xi = np.array([[0.5, 0.5, 0.25], [0.25, 0.25, 0.5]])
    assert impl.accept_mask(xi, 2, 1.0).tolist() == [True, False]
    assert impl.first_accepted(np.full((3, 3), 0.1), 2, 1.0) == -1


def test_running_neg_sup_matches_oracle(impl):
    v = np.array([0.5, -0.2, 0.1, -1.0, 0.3, -0.5])
    np.testing.assert_array_equal(impl.running_neg_sup(v), _oracle_neg_sup(v))


def test_reflect_rows_is_nonnegative(impl):
    G = np.random.default_rng(2).normal(size=(20, 50)).cumsum(axis=1)
    R = impl.reflect_rows(G)
    assert np.all(R >= 0)
    assert np.all(R >= G)


def test_count_leq(impl):
    e = np.array([0.1, 0.2, 0.2, 0.7])
    assert impl.count_leq(e, [0.0, 0.1, 0.2, 0.5, 1.0]).tolist() == [0, 1, 3, 3, 4]


def test_counting_sup_deviation_against_dense_scan(impl):
    S = np.sort(np.random.default_rng(3).random(12))
    fine = np.union1d(np.linspace(0, 1, 200001), S)
    A = np.searchsorted(S, fine, side="right") / S.size
    dense = np.max(np.abs(A - fine))
    exact = impl.counting_sup_deviation(S, 1.0)
    assert dense <= exact + 1e-15
    assert exact - dense < 1e-5


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
def test_backends_are_bit_identical():
    py, cy = BACKENDS["python"], BACKENDS["compiled"]
    gen = np.random.default_rng(4)
    for n in (1, 5, 50):
        xi = gen.exponential(1.0 / n, size=(2000, n + 1))
        assert np.array_equal(py.accept_mask(xi, n, 1.0), cy.accept_mask(xi, n, 1.0))
        assert py.first_accepted(xi, n, 1.0) == cy.first_accepted(xi, n, 1.0)
    G = gen.normal(size=(30, 257)).cumsum(axis=1)
    assert np.array_equal(py.reflect_rows(G), cy.reflect_rows(G))
    assert np.array_equal(py.running_neg_sup(G[0]), cy.running_neg_sup(G[0]))
    S = np.sort(gen.random(333))
    t = gen.random(100)
    assert np.array_equal(py.count_leq(S, t), cy.count_leq(S, t))
    assert py.counting_sup_deviation(S, 1.0) == cy.counting_sup_deviation(S, 1.0)


def test_pure_backend_selected_by_environment(monkeypatch):
    import importlib
    monkeypatch.setenv("TRANSITORY_SIM_PURE", "1")
    try:
        reloaded = importlib.reload(kernels)
        assert reloaded.BACKEND == "python"
    finally:
        monkeypatch.delenv("TRANSITORY_SIM_PURE")
        importlib.reload(kernels)
