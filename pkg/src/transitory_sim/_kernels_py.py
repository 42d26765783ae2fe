"""Pure-numpy versions of the hot kernels.

Each function must return bit-identical results to its twin in ``_kernels.pyx``;
``tests/test_kernels.py`` checks this on random inputs. Float results are
built from the same IEEE operations in the same order (``cumsum`` is a
sequential left-to-right sum, ``maximum`` keeps its first argument on ties).
"""
import numpy as np


def accept_mask(xi, n, T):
    """Rows of ``xi`` (shape ``(B, n+1)``) lying in ``{S_n <= T < S_{n+1}}``.

    Rows whose first ``n`` partial sums are not strictly increasing (a zero or
    underflowing interarrival time) are rejected, so accepted rows always give
    strictly increasing arrival epochs.
    """
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    S = np.cumsum(xi, axis=1)
    prev = np.concatenate([np.zeros((S.shape[0], 1)), S[:, : n - 1]], axis=1)
    strict = np.all(S[:, :n] > prev, axis=1)
    return strict & (S[:, n - 1] <= T) & (S[:, n] > T)


def first_accepted(xi, n, T):
    hits = np.flatnonzero(accept_mask(xi, n, T))
    return int(hits[0]) if hits.size else -1


def running_neg_sup(values):
    """``out[k] = max_{j<=k} max(0, -values[j])``."""
    v = np.asarray(values, dtype=np.float64)
    return np.maximum.accumulate(np.maximum(0.0, -v), axis=-1)


def reflect_rows(paths):
    """Row-wise reflection ``G + running_neg_sup(G)`` of a 2-D array."""
    G = np.ascontiguousarray(paths, dtype=np.float64)
    return G + running_neg_sup(G)


def count_leq(epochs, times):
    """Number of ``epochs`` (sorted) that are ``<= t`` for each ``t`` in ``times``."""
    return np.searchsorted(np.asarray(epochs, dtype=np.float64),
                           np.asarray(times, dtype=np.float64), side="right").astype(np.int64)


def counting_sup_deviation(S, T):
    """``sup_{0<=t<=T} |A(t)/n - t/T|`` for the counting path of partial sums ``S``.

    On ``[S_k, S_{k+1})`` the path ``A/n`` equals ``k/n`` while ``t/T`` runs over
    ``[S_k/T, S_{k+1}/T)``, so the supremum is attained or approached at the
    jump epochs from one of the two sides.
    """
    S = np.asarray(S, dtype=np.float64)
    n = S.size
    if n == 0:
        return 0.0
    k = np.arange(1, n + 1)
    x = S / T
    after = np.abs(k / n - x)
    before = np.abs((k - 1) / n - x)
    return float(np.maximum(after, before).max())
