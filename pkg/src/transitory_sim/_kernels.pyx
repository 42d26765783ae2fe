# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef inline bint _row_accepted(const double[:, ::1] xi, Py_ssize_t r, Py_ssize_t n, double T) nogil:
    cdef double s = 0.0
    cdef double prev = 0.0
    cdef Py_ssize_t k
    for k in range(n):
        s = s + xi[r, k]
        if not (s > prev):
            return False
        if s > T:
            # partial sums only grow, so S_n > T as well
            return False
        prev = s
    return (s + xi[r, n]) > T


def accept_mask(xi, Py_ssize_t n, double T):
    cdef const double[:, ::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t rows = x.shape[0]
    out = np.zeros(rows, dtype=bool)
    cdef cnp.uint8_t[::1] o = out.view(np.uint8)
    cdef Py_ssize_t r
    with nogil:
        for r in range(rows):
            o[r] = _row_accepted(x, r, n, T)
    return out


def first_accepted(xi, Py_ssize_t n, double T):
    cdef const double[:, ::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t rows = x.shape[0]
    cdef Py_ssize_t r
    cdef Py_ssize_t found = -1
    with nogil:
        for r in range(rows):
            if _row_accepted(x, r, n, T):
                found = r
                break
    return int(found)


cdef inline void _neg_sup_row(const double* g, double* out, Py_ssize_t m) nogil:
    cdef double cur, z, v
    cdef Py_ssize_t k
    for k in range(m):
        v = -g[k]
        # numpy.maximum(a, b) returns a when a >= b, else b
        z = 0.0 if 0.0 >= v else v
        if k == 0:
            cur = z
        elif not (cur >= z):
            cur = z
        out[k] = cur


def running_neg_sup(values):
    arr = np.ascontiguousarray(values, dtype=np.float64)
    out = np.empty_like(arr)
    if arr.size == 0:
        return out
    cdef const double[:, ::1] g = arr.reshape(-1, arr.shape[arr.ndim - 1])
    cdef double[:, ::1] o = out.reshape(-1, arr.shape[arr.ndim - 1])
    cdef Py_ssize_t r
    with nogil:
        for r in range(g.shape[0]):
            _neg_sup_row(&g[r, 0], &o[r, 0], g.shape[1])
    return out


def reflect_rows(paths):
    arr = np.ascontiguousarray(paths, dtype=np.float64)
    out = np.empty_like(arr)
    if arr.size == 0:
        return out
    cdef const double[:, ::1] g = arr.reshape(-1, arr.shape[arr.ndim - 1])
    cdef double[:, ::1] o = out.reshape(-1, arr.shape[arr.ndim - 1])
    cdef Py_ssize_t r, k
    with nogil:
        for r in range(g.shape[0]):
            _neg_sup_row(&g[r, 0], &o[r, 0], g.shape[1])
            for k in range(g.shape[1]):
                o[r, k] = g[r, k] + o[r, k]
    return out


def count_leq(epochs, times):
    cdef const double[::1] e = np.ascontiguousarray(epochs, dtype=np.float64).reshape(-1)
    t_arr = np.ascontiguousarray(times, dtype=np.float64)
    out = np.empty(t_arr.shape, dtype=np.int64)
    cdef const double[::1] t = t_arr.reshape(-1)
    cdef cnp.int64_t[::1] o = out.reshape(-1)
    cdef Py_ssize_t i, lo, hi, mid
    cdef Py_ssize_t ne = e.shape[0]
    with nogil:
        for i in range(t.shape[0]):
            lo = 0
            hi = ne
            while lo < hi:
                mid = (lo + hi) >> 1
                if e[mid] <= t[i]:
                    lo = mid + 1
                else:
                    hi = mid
            o[i] = lo
    return out


def counting_sup_deviation(S, double T):
    cdef const double[::1] s = np.ascontiguousarray(S, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t k
    cdef double x, after, before, best = 0.0, cand
    cdef double dn = <double>n
    if n == 0:
        return 0.0
    with nogil:
        for k in range(1, n + 1):
            x = s[k - 1] / T
            after = fabs(<double>k / dn - x)
            before = fabs(<double>(k - 1) / dn - x)
            cand = after if after >= before else before
            if k == 1 or cand > best:
                best = cand
    return float(best)
