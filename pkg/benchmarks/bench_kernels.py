"""Benchmark the compiled kernels against the pure-Python fallback.

Times the two hot kernels (quadrature-weight generation and the weighted
state update) in isolation, then a full adaptive sampling run under each
backend. The end-to-end comparison uses subprocesses so the backend choice
happens at import time, exactly as it does for users.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from predit._kernels import pure

try:
    from predit._kernels import _native
except ImportError:
    _native = None

END_TO_END = """
import numpy as np
import predit
from predit import FieldSpec, PolicyParams, Schedule, make_field, sample
field = make_field(FieldSpec("nonuniform", dim=64, a=1.0, b=4.0))
sched = Schedule.uniform(0.0, 1.0, 2000)
x0 = np.zeros(64)
import time
start = time.perf_counter()
for _ in range(REPS):
    field.calls = 0
    sample(x0, sched, field, PolicyParams(tau=0.5))
elapsed = time.perf_counter() - start
print(f"{predit.kernel_backend} end-to-end: {elapsed / REPS * 1e3:.2f} ms/run")
"""


def bench_kernel(label, impl, reps):
    nodes4 = np.array([0.9, 0.6, 0.3, 0.0])
    weights_time = timeit.timeit(
        lambda: impl.lagrange_weights(nodes4, 0.9, 1.0), number=reps
    )
    x = np.zeros(64)
    fs = np.random.default_rng(0).standard_normal((4, 64))
    w = np.array([2.2916666666666665, -2.458333333333333, 1.5416666666666667, -0.375])
    step_time = timeit.timeit(lambda: impl.weighted_step(x, fs, w), number=reps)
    print(
        f"{label:8s} lagrange_weights(4 nodes): {weights_time / reps * 1e6:8.2f} us"
        f"   weighted_step(4x64): {step_time / reps * 1e6:8.2f} us"
    )
    return weights_time, step_time


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="fewer repetitions")
    args = parser.parse_args()
    reps = 20_000 if args.quick else 200_000
    runs = 3 if args.quick else 10

    print(f"kernel micro-benchmarks ({reps} reps)")
    pure_w, pure_s = bench_kernel("pure", pure, reps)
    if _native is not None:
        nat_w, nat_s = bench_kernel("native", _native, reps)
        print(
            f"speedup: weights {pure_w / nat_w:.1f}x, step {pure_s / nat_s:.1f}x"
        )
    else:
        print("native kernels unavailable (pure fallback only)")

    print(f"\nend-to-end adaptive run, 2000 steps, dim 64 ({runs} reps)")
    script = END_TO_END.replace("REPS", str(runs))
    for env_label, env in (
        ("native", {}),
        ("pure", {"PREDIT_PURE_KERNELS": "1"}),
    ):
        if env_label == "native" and _native is None:
            continue
        result = subprocess.run(
            [sys.executable, "-c", script],
            capture_output=True, text=True, env={**os.environ, **env},
        )
        sys.stdout.write(result.stdout)
        if result.returncode != 0:
            sys.stderr.write(result.stderr)


if __name__ == "__main__":
    main()
