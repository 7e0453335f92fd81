"""Pure-Python fallback for the quadrature and step kernels.

Mirrors the compiled extension operation for operation (same loop structure,
same accumulation order) so both backends produce bit-identical float64
results. Node counts are tiny (<= 5 for the supported orders), so plain
Python loops are acceptable here; the state update stays vectorized.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"

MAX_NODES = 8


def lagrange_weights(nodes, t_start, t_end):
    """Quadrature weights of the Lagrange basis over (t_start, t_end).

    For interpolation nodes ``nodes``, returns ``w`` with
    ``w[j] = integral of L_j(s) ds`` from t_start to t_end, where L_j is the
    j-th Lagrange basis polynomial. The basis numerators are expanded to
    monomials in the shifted coordinate u = s - t_start and integrated in
    closed form, so the only rounding is ordinary float arithmetic.
    """
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    n = nodes.shape[0]
    if n == 0:
        raise ValueError("at least one interpolation node is required")
    if n > MAX_NODES:
        raise ValueError(f"too many interpolation nodes ({n} > {MAX_NODES})")

    span = t_end - t_start
    shifted = [nodes[m] - t_start for m in range(n)]

    out = np.empty(n, dtype=np.float64)
    for j in range(n):
        # coeffs[p] multiplies u^p in prod_{m != j} (u - shifted[m])
        coeffs = [0.0] * n
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
        # integral of u^p over (0, span) is span^(p+1) / (p+1)
        acc = 0.0
        span_pow = span
        for p in range(deg + 1):
            acc += coeffs[p] * span_pow / (p + 1)
            span_pow *= span
        out[j] = acc / denom
    return out


def weighted_step(x, fs, w):
    """Return ``x + sum_j w[j] * fs[j]`` accumulated in node order."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    fs = np.ascontiguousarray(fs, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if fs.ndim != 2 or fs.shape[0] != w.shape[0] or fs.shape[1] != x.shape[0]:
        raise ValueError("shape mismatch between state, node values, and weights")
    out = x.copy()
    for j in range(w.shape[0]):
        out += w[j] * fs[j]
    return out
