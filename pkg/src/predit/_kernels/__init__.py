"""Kernel backend selection.

The compiled extension is used when it imported cleanly; otherwise the
pure-Python implementation takes over with identical semantics. Set
PREDIT_PURE_KERNELS=1 to force the fallback (used by the benchmark and the
backend-parity tests).
"""

import os

if os.environ.get("PREDIT_PURE_KERNELS"):
    from predit._kernels import pure as _impl
else:
    try:
        from predit._kernels import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        from predit._kernels import pure as _impl  # type: ignore[no-redef]

BACKEND = _impl.BACKEND
MAX_NODES = _impl.MAX_NODES
lagrange_weights = _impl.lagrange_weights
weighted_step = _impl.weighted_step

__all__ = ["BACKEND", "MAX_NODES", "lagrange_weights", "weighted_step"]
