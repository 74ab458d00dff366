# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot numerical loops.

Mirrors `kgsa._core_py` function-for-function; see that module for the
contracts.  Accumulation orders match the numpy fallback.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def sqdist_cross(a, b):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0], dim = av.shape[1]
    out = np.zeros((n, m))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc, d
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(dim):
                d = av[i, k] - bv[j, k]
                acc += d * d
            ov[i, j] = acc
    return out


def pair_sqdist(a, b):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0], dim = av.shape[1]
    out = np.zeros(n)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, k
    cdef double acc, d
    for i in range(n):
        acc = 0.0
        for k in range(dim):
            d = av[i, k] - bv[i, k]
            acc += d * d
        ov[i] = acc
    return out


def second_neighbors(points):
    cdef const double[:, ::1] pv = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0], dim = pv.shape[1]
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] ov = out
    cdef Py_ssize_t i, j, k, best_j
    cdef double best_d, acc, d
    for i in range(n):
        best_j = -1
        best_d = 0.0
        for j in range(n):
            if j == i:
                continue
            acc = 0.0
            for k in range(dim):
                d = pv[i, k] - pv[j, k]
                acc += d * d
            # strict < keeps the smallest index among equal distances
            if best_j < 0 or acc < best_d:
                best_d = acc
                best_j = j
        ov[i] = best_j
    return out


def reactor_rk4(y0, rates, double t_end, Py_ssize_t n_steps):
    cdef const double[::1] y0v = np.ascontiguousarray(y0, dtype=np.float64)
    cdef const double[:, ::1] rv = np.ascontiguousarray(rates, dtype=np.float64)
    cdef Py_ssize_t n = rv.shape[0]
    out = np.empty((n, 5))
    cdef double[:, ::1] ov = out
    cdef double h = t_end / n_steps
    cdef Py_ssize_t i, s, c
    cdef double k1, k2, k3, k4
    cdef double y[5]
    cdef double f1[5]
    cdef double f2[5]
    cdef double f3[5]
    cdef double f4[5]
    cdef double tmp[5]

    for i in range(n):
        k1 = rv[i, 0]
        k2 = rv[i, 1]
        k3 = rv[i, 2]
        k4 = rv[i, 3]
        for c in range(5):
            y[c] = y0v[c]
        for s in range(n_steps):
            _rhs(k1, k2, k3, k4, y, f1)
            for c in range(5):
                tmp[c] = y[c] + (0.5 * h) * f1[c]
            _rhs(k1, k2, k3, k4, tmp, f2)
            for c in range(5):
                tmp[c] = y[c] + (0.5 * h) * f2[c]
            _rhs(k1, k2, k3, k4, tmp, f3)
            for c in range(5):
                tmp[c] = y[c] + h * f3[c]
            _rhs(k1, k2, k3, k4, tmp, f4)
            for c in range(5):
                y[c] = y[c] + (h / 6.0) * (f1[c] + 2.0 * f2[c] + 2.0 * f3[c] + f4[c])
        for c in range(5):
            ov[i, c] = y[c]
    return out


cdef inline void _rhs(double k1, double k2, double k3, double k4,
                      double* y, double* out) noexcept nogil:
    cdef double r1 = k1 * y[0] * y[1]
    cdef double r2 = k2 * y[0] * y[1]
    cdef double r3 = k3 * y[1] * y[2]
    cdef double r4 = k4 * y[1] * y[3]
    out[0] = -r1 - r2
    out[1] = -r1 - r2 - r3 - r4
    out[2] = r1 - r3
    out[3] = r2 - r4
    out[4] = r3 + r4
