"""Pure-numpy LIF temporal scans (fallback for the compiled kernels)."""

import numpy as np


def lif_forward(x, beta, u_th, v_reset, h0):
    x = np.ascontiguousarray(x, dtype=np.float64)
    T, M = x.shape
    u = np.empty((T, M), dtype=np.float64)
    s = np.empty((T, M), dtype=np.uint8)
    h = np.array(h0, dtype=np.float64, copy=True)
    for t in range(T):
        ut = h + x[t]
        fired = ut >= u_th
        u[t] = ut
        s[t] = fired
        h = np.where(fired, v_reset, beta * ut)
    return u, s, h


def lif_backward(grad_s, u, s, beta, u_th, width):
    T, M = grad_s.shape
    half = 0.5 * width
    inv = 1.0 / width
    gx = np.empty((T, M), dtype=np.float64)
    g_h = np.zeros(M, dtype=np.float64)
    for t in range(T - 1, -1, -1):
        d = u[t] - u_th
        inside = (d > -half) & (d < half)
        g_u = np.where(inside, grad_s[t] * inv, 0.0)
        g_u = np.where(s[t] == 0, g_u + g_h * beta, g_u)
        gx[t] = g_u
        g_h = g_u
    return gx
