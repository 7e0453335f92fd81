# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled quadrature and step kernels.

Must stay arithmetic-identical to predit._kernels.pure: same loop structure,
same accumulation order, no fused multiply-adds beyond what plain C at the
default optimization level emits.
"""

import numpy as np


BACKEND = "native"

MAX_NODES = 8


def lagrange_weights(nodes, double t_start, double t_end):
    """Quadrature weights of the Lagrange basis over (t_start, t_end)."""
    cdef double[::1] nd = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef Py_ssize_t n = nd.shape[0]
    if n == 0:
        raise ValueError("at least one interpolation node is required")
    if n > MAX_NODES:
        raise ValueError(f"too many interpolation nodes ({n} > {MAX_NODES})")

    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr

    cdef double span = t_end - t_start
    cdef double shifted[8]
    cdef double coeffs[9]
    cdef Py_ssize_t j, m, p, deg
    cdef double um, denom, acc, span_pow

    for m in range(n):
        shifted[m] = nd[m] - t_start

    for j in range(n):
        for p in range(n):
            coeffs[p] = 0.0
        coeffs[0] = 1.0
        deg = 0
        denom = 1.0
        for m in range(n):
            if m == j:
                continue
            um = shifted[m]
            deg += 1
            for p in range(deg, 0, -1):
                coeffs[p] = coeffs[p - 1] - um * coeffs[p]
            coeffs[0] = -um * coeffs[0]
            denom *= shifted[j] - um
        acc = 0.0
        span_pow = span
        for p in range(deg + 1):
            acc += coeffs[p] * span_pow / (p + 1)
            span_pow *= span
        out[j] = acc / denom
    return out_arr


def weighted_step(x, fs, w):
    """Return ``x + sum_j w[j] * fs[j]`` accumulated in node order."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] fv = np.ascontiguousarray(fs, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    if fv.shape[0] != wv.shape[0] or fv.shape[1] != xv.shape[0]:
        raise ValueError("shape mismatch between state, node values, and weights")

    cdef Py_ssize_t d = xv.shape[0]
    cdef Py_ssize_t k = wv.shape[0]
    out_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double acc

    for i in range(d):
        acc = xv[i]
        for j in range(k):
            acc += wv[j] * fv[j, i]
        out[i] = acc
    return out_arr
