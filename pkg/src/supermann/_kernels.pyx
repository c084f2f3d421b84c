# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Broyden buffer chains and LTI stage loops.

Mirrors _kernels_py; keep the two in sync (tests enforce parity).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def chain_apply(double[:, ::1] S, double[:, ::1] St, Py_ssize_t count,
                double[::1] v):
    cdef Py_ssize_t n = v.shape[0]
    cdef cnp.ndarray[double, ndim=1] out_arr = np.array(v, copy=True)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double dot
    for i in range(count):
        dot = 0.0
        for j in range(n):
            dot += S[i, j] * out[j]
        for j in range(n):
            out[j] += dot * St[i, j]
    return out_arr


def chain_apply2(double[:, ::1] S, double[:, ::1] St, Py_ssize_t count,
                 double[::1] v1, double[::1] v2):
    cdef Py_ssize_t n = v1.shape[0]
    cdef cnp.ndarray[double, ndim=1] o1_arr = np.array(v1, copy=True)
    cdef cnp.ndarray[double, ndim=1] o2_arr = np.array(v2, copy=True)
    cdef double[::1] o1 = o1_arr
    cdef double[::1] o2 = o2_arr
    cdef Py_ssize_t i, j
    cdef double d1, d2
    for i in range(count):
        d1 = 0.0
        d2 = 0.0
        for j in range(n):
            d1 += S[i, j] * o1[j]
            d2 += S[i, j] * o2[j]
        for j in range(n):
            o1[j] += d1 * St[i, j]
            o2[j] += d2 * St[i, j]
    return o1_arr, o2_arr


def lti_forward(double[:, ::1] Ad, double[:, ::1] Bd, double[::1] u,
                double[::1] x0):
    cdef Py_ssize_t nx = Ad.shape[0]
    cdef Py_ssize_t nu = Bd.shape[1]
    cdef Py_ssize_t N = u.shape[0] // nu
    cdef cnp.ndarray[double, ndim=1] out_arr = np.empty(N * nx)
    cdef double[::1] out = out_arr
    cdef cnp.ndarray[double, ndim=1] x_arr = np.array(x0, copy=True)
    cdef cnp.ndarray[double, ndim=1] xn_arr = np.empty(nx)
    cdef double[::1] x = x_arr
    cdef double[::1] xn = xn_arr
    cdef Py_ssize_t t, i, j
    cdef double acc
    for t in range(N):
        for i in range(nx):
            acc = 0.0
            for j in range(nx):
                acc += Ad[i, j] * x[j]
            for j in range(nu):
                acc += Bd[i, j] * u[t * nu + j]
            xn[i] = acc
        for i in range(nx):
            x[i] = xn[i]
            out[t * nx + i] = xn[i]
    return out_arr


def lti_adjoint(double[:, ::1] Ad, double[:, ::1] Bd, double[::1] v):
    cdef Py_ssize_t nx = Ad.shape[0]
    cdef Py_ssize_t nu = Bd.shape[1]
    cdef Py_ssize_t N = v.shape[0] // nx
    cdef cnp.ndarray[double, ndim=1] out_arr = np.empty(N * nu)
    cdef double[::1] out = out_arr
    cdef cnp.ndarray[double, ndim=1] p_arr = np.zeros(nx)
    cdef cnp.ndarray[double, ndim=1] pn_arr = np.empty(nx)
    cdef double[::1] p = p_arr
    cdef double[::1] pn = pn_arr
    cdef Py_ssize_t t, i, j
    cdef double acc
    for t in range(N - 1, -1, -1):
        for i in range(nx):
            p[i] += v[t * nx + i]
        for j in range(nu):
            acc = 0.0
            for i in range(nx):
                acc += Bd[i, j] * p[i]
            out[t * nu + j] = acc
        for j in range(nx):
            acc = 0.0
            for i in range(nx):
                acc += Ad[i, j] * p[i]
            pn[j] = acc
        for i in range(nx):
            p[i] = pn[i]
    return out_arr
