# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled LIF temporal scans.

Both kernels operate on arrays flattened to ``(T, M)`` where ``M`` is
batch size times layer width. The pure-numpy twins live in
``_kernels_py`` and must agree with these bit-for-bit.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def lif_forward(const double[:, ::1] x, double beta, double u_th,
                double v_reset, const double[::1] h0):
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t M = x.shape[1]
    cdef Py_ssize_t t, m
    cdef double h, u

    u_arr = np.empty((T, M), dtype=np.float64)
    s_arr = np.empty((T, M), dtype=np.uint8)
    h_arr = np.empty(M, dtype=np.float64)
    cdef double[:, ::1] uv = u_arr
    cdef cnp.uint8_t[:, ::1] sv = s_arr
    cdef double[::1] hv = h_arr

    for m in range(M):
        h = h0[m]
        for t in range(T):
            u = h + x[t, m]
            uv[t, m] = u
            if u >= u_th:
                sv[t, m] = 1
                h = v_reset
            else:
                sv[t, m] = 0
                h = beta * u
        hv[m] = h
    return u_arr, s_arr, h_arr


def lif_backward(const double[:, ::1] grad_s, const double[:, ::1] u,
                 const cnp.uint8_t[:, ::1] s, double beta, double u_th,
                 double width):
    cdef Py_ssize_t T = grad_s.shape[0]
    cdef Py_ssize_t M = grad_s.shape[1]
    cdef Py_ssize_t t, m
    cdef double g_h, g_u, d
    cdef double half = 0.5 * width
    cdef double inv = 1.0 / width

    gx_arr = np.empty((T, M), dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr

    for m in range(M):
        g_h = 0.0
        for t in range(T - 1, -1, -1):
            d = u[t, m] - u_th
            g_u = 0.0
            if -half < d < half:
                g_u = grad_s[t, m] * inv
            if s[t, m] == 0:
                g_u = g_u + g_h * beta
            gx[t, m] = g_u
            g_h = g_u
    return gx_arr
