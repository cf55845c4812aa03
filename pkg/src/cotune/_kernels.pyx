# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors cotune._kernels_py exactly in semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, floor

cnp.import_array()

cdef double MU_SET = 0.3
cdef double MU_UNSET = 0.7


def sq_exp_kernel(X1, X2, lengthscales, double variance):
    cdef double[:, ::1] a = np.ascontiguousarray(X1, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(X2, dtype=np.float64)
    cdef double[::1] inv = 1.0 / np.ascontiguousarray(lengthscales, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], D = a.shape[1]
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, d
    cdef double acc, t
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for d in range(D):
                t = (a[i, d] - b[j, d]) * inv[d]
                acc += t * t
            out[i, j] = variance * exp(-0.5 * acc)
    return out_arr


def beta_counts(entries, long buffer_size, double rfactor):
    cdef double[::1] e = np.ascontiguousarray(entries, dtype=np.float64)
    cdef Py_ssize_t n = e.shape[0]
    cdef Py_ssize_t start = 0
    if buffer_size > 0 and buffer_size < n:
        start = n - buffer_size
    cdef long S = 0, F = 0
    cdef Py_ssize_t i
    cdef double r
    for i in range(start, n):
        r = e[i]
        if r > 0:
            S += <long> floor(r / rfactor + 0.5)
        else:
            F += 1
    return S, F


def synthetic_objective(knobs, bits, queries, mu_bit, gains, double lam, speedups, base_costs):
    cdef double[:, ::1] k = np.ascontiguousarray(knobs, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(bits, dtype=np.float64)
    cdef long long[:, ::1] q = np.ascontiguousarray(queries, dtype=np.int64)
    cdef long long[::1] mb = np.ascontiguousarray(mu_bit, dtype=np.int64)
    cdef double[::1] g = np.ascontiguousarray(gains, dtype=np.float64)
    cdef double[:, ::1] s = np.ascontiguousarray(speedups, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(base_costs, dtype=np.float64)
    cdef Py_ssize_t n = k.shape[0], dk = k.shape[1], nb = b.shape[1], nq = q.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double total = 0.0
    cdef Py_ssize_t i, d
    for d in range(nb):
        total += g[d]
    cdef double kt, p, pq, mu, t, qt
    for i in range(n):
        kt = 0.0
        for d in range(dk):
            mu = MU_SET if b[i, mb[d]] > 0.5 else MU_UNSET
            t = k[i, d] - mu
            kt += t * t
        p = 0.0
        pq = 0.0
        for d in range(nb):
            p += b[i, d] * g[d]
            pq += b[i, d] * g[d] * g[d]
        qt = 0.0
        for d in range(nq):
            qt += c[d] * s[d, q[i, d]]
        out[i] = kt + (total - p + lam * 0.5 * (p * p - pq) / total) + qt
    return out_arr
