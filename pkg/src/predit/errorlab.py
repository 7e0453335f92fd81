"""Reference solutions, convergence-order regression, and drift measurement.

Every study reports which reference path it used (closed form or dense
RK4) and whether the reference was accurate enough for the measured
errors to mean anything; consumers must treat invalid reports as
unusable rather than quietly citing them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from predit.errors import ConfigurationError, DegenerateStudyError, InvalidStudyError
from predit.fields import FieldSpec, OracleHandle, make_field
from predit.multistep import History, ab_step, abm_step
from predit.sampler import RunStats, Schedule, sample

RK4_REFINEMENT = 64
# the fallback reference must be at least this much tighter than anything measured
REFERENCE_MARGIN = 0.01


@dataclass
class ConvergenceReport:
    """Global errors over a family of step sizes plus the fitted order."""

    method: str
    step_sizes: list[float]          # strictly decreasing
    step_counts: list[int]
    global_errors: list[float]
    slope: float
    intercept: float
    reference: str                   # "exact" or "rk4"
    reference_error: float = 0.0
    valid: bool = True

    CSV_FIELDS = (
        "study",
        "method",
        "n_steps",
        "step_size",
        "global_error",
        "slope",
        "intercept",
        "reference",
        "valid",
    )

    def csv_rows(self) -> list[list]:
        return [
            ["converge", self.method, n, h, e, self.slope, self.intercept,
             self.reference, self.valid]
            for n, h, e in zip(self.step_counts, self.step_sizes, self.global_errors)
        ]

    def to_json(self) -> dict:
        return {
            "study": "converge",
            "method": self.method,
            "params": {
                "step_counts": self.step_counts,
                "reference": self.reference,
                "reference_error": self.reference_error,
                "valid": self.valid,
            },
            "rows": [
                {"n_steps": n, "step_size": h, "global_error": e}
                for n, h, e in zip(self.step_counts, self.step_sizes, self.global_errors)
            ],
            "slope": self.slope,
            "intercept": self.intercept,
        }


@dataclass
class DriftReport:
    """Distance from the reference trajectory along one run.

    ``accumulated_drift`` sums the magnitudes of the per-step deviation
    changes (total variation of the error path): each step's freshly
    introduced error counts, and errors of opposite sign cannot cancel.
    The endpoint deviation is reported separately as ``final_error``; it
    can be misleadingly small when an early error decays or cancels
    against later drift of the opposite sign.
    """

    policy_label: str
    times: list[float]
    per_step_error: list[float]
    accumulated_drift: float         # cancellation-free accumulation
    final_error: float               # deviation at the last schedule time
    oracle_calls: int
    reference: str
    reference_error: float = 0.0
    valid: bool = True

    CSV_FIELDS = (
        "study",
        "policy",
        "oracle_calls",
        "accumulated_drift",
        "final_error",
        "reference",
        "valid",
    )

    def csv_rows(self) -> list[list]:
        return [[
            "drift", self.policy_label, self.oracle_calls, self.accumulated_drift,
            self.final_error, self.reference, self.valid,
        ]]

    def series_rows(self) -> list[list]:
        return [
            [self.policy_label, i, t, e]
            for i, (t, e) in enumerate(zip(self.times, self.per_step_error))
        ]

    def to_json(self) -> dict:
        return {
            "study": "drift",
            "method": self.policy_label,
            "params": {
                "oracle_calls": self.oracle_calls,
                "reference": self.reference,
                "reference_error": self.reference_error,
                "valid": self.valid,
            },
            "rows": [
                {"index": i, "t": t, "error": e}
                for i, (t, e) in enumerate(zip(self.times, self.per_step_error))
            ],
            "accumulated_drift": self.accumulated_drift,
            "final_error": self.final_error,
        }


def _rk4_dense(field: OracleHandle | FieldSpec, x_init, schedule: Schedule, refinement: int) -> np.ndarray:
    """Classical RK4 at ``refinement`` substeps per schedule interval,
    subsampled back to the schedule times. Uses the uncounted evaluation."""
    handle = make_field(field) if isinstance(field, FieldSpec) else field
    f = handle.func
    x = np.array(x_init, dtype=np.float64, copy=True).reshape(-1)
    out = [x.copy()]
    times = schedule.times
    for n in range(schedule.n_steps):
        sub = np.linspace(times[n], times[n + 1], refinement + 1)
        for m in range(refinement):
            t0, t1 = float(sub[m]), float(sub[m + 1])
            h = t1 - t0
            k1 = f(x, t0)
            k2 = f(x + 0.5 * h * k1, t0 + 0.5 * h)
            k3 = f(x + 0.5 * h * k2, t0 + 0.5 * h)
            k4 = f(x + h * k3, t1)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out.append(x.copy())
    return np.stack(out)


def reference_solution(
    field: OracleHandle | FieldSpec,
    x_init,
    schedule: Schedule,
    *,
    allow_rk4: bool = True,
    refinement: int = RK4_REFINEMENT,
) -> np.ndarray:
    """States at the schedule times: closed form when the field has one,
    otherwise dense RK4 subsampled to the schedule."""
    handle = make_field(field) if isinstance(field, FieldSpec) else field
    x0 = np.asarray(x_init, dtype=np.float64).reshape(-1)
    if handle.exact is not None:
        t0 = float(schedule.times[0])
        return np.stack([handle.exact(x0, t0, float(t)) for t in schedule.times])
    if not allow_rk4:
        raise ConfigurationError(
            f"field {handle.label} has no exact solution and RK4 fallback is disabled"
        )
    return _rk4_dense(handle, x0, schedule, refinement)


def _reference_with_hygiene(field, x_init, schedule):
    """Reference states plus an estimate of the reference's own error."""
    handle = make_field(field) if isinstance(field, FieldSpec) else field
    if handle.exact is not None:
        return reference_solution(handle, x_init, schedule), "exact", 0.0
    ref = _rk4_dense(handle, x_init, schedule, RK4_REFINEMENT)
    finer = _rk4_dense(handle, x_init, schedule, 2 * RK4_REFINEMENT)
    est = float(np.max(np.linalg.norm(ref - finer, axis=1)))
    return ref, "rk4", est


_METHOD_ORDERS = {
    "euler": ("euler", 1),
    "ab1": ("ab", 1), "ab2": ("ab", 2), "ab3": ("ab", 3), "ab4": ("ab", 4),
    "abm1": ("abm", 1), "abm2": ("abm", 2), "abm3": ("abm", 3), "abm4": ("abm", 4),
    # predict-evaluate-correct-evaluate pairing is the same scheme
    "am1-pece": ("abm", 1), "am2-pece": ("abm", 2),
    "am3-pece": ("abm", 3), "am4-pece": ("abm", 4),
}


def _integrate_fixed(method: str, handle: OracleHandle, x_init, schedule: Schedule) -> np.ndarray:
    """Run one integrator over the schedule and return the per-time trace.

    Multistep warm-up is seeded from the exact solution so bootstrap error
    cannot pollute order measurement.
    """
    kind, order = _METHOD_ORDERS[method]
    times = schedule.times
    x0 = np.asarray(x_init, dtype=np.float64).reshape(-1)

    if kind == "euler":
        x = x0.copy()
        trace = [x.copy()]
        for n in range(schedule.n_steps):
            t_n, t_next = float(times[n]), float(times[n + 1])
            x = x + (t_next - t_n) * handle(x, t_n)
            trace.append(x.copy())
        return np.stack(trace)

    if handle.exact is None:
        raise ConfigurationError(
            f"method {method} needs an exact solution to seed its warm-up"
        )
    t0 = float(times[0])
    history = History(dim=x0.shape[0], capacity=max(8, order + 2))
    trace = []
    for i in range(order):
        ti = float(times[i])
        xi = handle.exact(x0, t0, ti)
        history.push(ti, handle.func(xi, ti))
        if i < order - 1:
            trace.append(np.asarray(xi, dtype=np.float64).reshape(-1))
    x = np.asarray(handle.exact(x0, t0, float(times[order - 1])), dtype=np.float64).reshape(-1)
    trace.append(x.copy())

    if kind == "ab":
        for n in range(order - 1, schedule.n_steps):
            t_next = float(times[n + 1])
            x = ab_step(x, history, t_next, order)
            f_next = handle(x, t_next)
            history.push(t_next, f_next)
            trace.append(x.copy())
        return np.stack(trace)

    # abm: predict-evaluate-correct, then re-evaluate at the corrected state
    # on the next loop head (classical PECE cadence)
    for n in range(order - 1, schedule.n_steps):
        t_n, t_next = float(times[n]), float(times[n + 1])
        f_n = handle(x, t_n)
        if history.newest.t == t_n:
            history.replace_newest(f_n)
        else:
            history.push(t_n, f_n)
        x, f_tilde = abm_step(x, history, t_next, handle, order)
        history.push(t_next, f_tilde)
        trace.append(x.copy())
    return np.stack(trace)


def convergence_study(
    method: str,
    field: FieldSpec,
    t_span: tuple[float, float],
    step_counts: Sequence[int],
    x_init,
) -> ConvergenceReport:
    """Measure global error over a step-size family and fit the order.

    Global error is the maximum deviation from the reference over the whole
    schedule (sup norm). Measuring only the final state is misleading on
    symmetric intervals, where leading error terms can cancel at the
    endpoint and even-order methods appear one order better than they are.
    Each resolution gets a fresh counting handle; warm-up values come from
    the exact solution. The slope is an ordinary least-squares fit of
    ln(error) against ln(h).
    """
    method = method.lower()
    if method not in _METHOD_ORDERS:
        raise ConfigurationError(
            f"unknown method {method!r} (one of {sorted(_METHOD_ORDERS)})"
        )
    _, order = _METHOD_ORDERS[method]
    counts = [int(n) for n in step_counts]
    if len(counts) < 3:
        raise ConfigurationError("need at least 3 step counts for a regression")
    if any(n < 2 * order for n in counts):
        raise ConfigurationError(
            f"every step count must be at least 2x the method order ({2 * order})"
        )
    counts = sorted(counts)

    errors = []
    sizes = []
    reference = "exact"
    ref_err = 0.0
    for n in counts:
        schedule = Schedule.uniform(t_span[0], t_span[1], n)
        handle = make_field(field)
        ref, reference, est = _reference_with_hygiene(handle, x_init, schedule)
        ref_err = max(ref_err, est)
        trace = _integrate_fixed(method, handle, x_init, schedule)
        errors.append(float(np.max(np.linalg.norm(trace - ref, axis=1))))
        sizes.append(abs(t_span[1] - t_span[0]) / n)

    # errors at (or below) rounding level make the log-log regression
    # meaningless: the method reproduces this field exactly
    floor = 1e-13 * max(1.0, float(np.max(np.abs(ref))))
    if min(errors) <= floor:
        raise DegenerateStudyError(
            f"{method} measured only rounding-level error on {field.kind}; "
            "use a field with curvature"
        )
    slope, intercept = np.polyfit(np.log(sizes), np.log(errors), 1)
    valid = ref_err <= REFERENCE_MARGIN * min(errors)
    return ConvergenceReport(
        method=method,
        step_sizes=sizes,
        step_counts=counts,
        global_errors=errors,
        slope=float(slope),
        intercept=float(intercept),
        reference=reference,
        reference_error=ref_err,
        valid=valid,
    )


def drift_study(
    policy: Callable[..., tuple[np.ndarray, RunStats]],
    field: FieldSpec | OracleHandle,
    schedule: Schedule,
    x_init,
    label: str | None = None,
) -> DriftReport:
    """Run a policy with state snapshots and difference it against the
    reference at every schedule time.

    ``policy(x_init, schedule, oracle, record_x_trace=True)`` must return
    ``(x_final, stats)``; bind extra parameters before passing it in.
    """
    handle = make_field(field) if isinstance(field, FieldSpec) else field
    ref, reference, est = _reference_with_hygiene(handle, x_init, schedule)
    _, stats = policy(x_init, schedule, handle, record_x_trace=True)
    trace = np.stack(stats.x_trace)
    errors = np.linalg.norm(trace - ref, axis=1)
    measured = [e for e in errors.tolist() if e > 0.0]
    valid = (not measured) or est <= REFERENCE_MARGIN * min(measured)
    return DriftReport(
        policy_label=label or getattr(policy, "__name__", "policy"),
        times=[float(t) for t in schedule.times],
        per_step_error=errors.tolist(),
        accumulated_drift=float(np.sum(np.abs(np.diff(errors)))),
        final_error=float(errors[-1]),
        oracle_calls=stats.oracle_calls,
        reference=reference,
        reference_error=est,
        valid=valid,
    )


def call_allocation_profile(stats: RunStats, schedule: Schedule) -> np.ndarray:
    """Count full-compute (non-skipped) steps per schedule-time decile."""
    if not stats.decision_trace:
        raise ConfigurationError("stats carries no decision trace")
    t0 = float(schedule.times[0])
    t_end = float(schedule.times[-1])
    span = t_end - t0
    counts = np.zeros(10, dtype=np.int64)
    for rec in stats.decision_trace:
        if not rec.computed:
            continue
        frac = (rec.t - t0) / span
        decile = min(9, int(frac * 10.0))
        counts[decile] += 1
    return counts


def require_valid(report) -> None:
    """Raise InvalidStudyError when reference hygiene failed."""
    if not report.valid:
        raise InvalidStudyError(
            f"reference error {report.reference_error:.3e} is not below "
            f"{REFERENCE_MARGIN:.0%} of the smallest measured error"
        )


def calibrate_interval(target_calls: int, n_steps: int) -> int:
    """Fixed-interval cadence whose call count best matches a target."""
    if target_calls < 1:
        raise ConfigurationError("target_calls must be positive")
    best, best_gap = 1, None
    for interval in range(1, n_steps + 1):
        calls = math.ceil(n_steps / interval)
        gap = abs(calls - target_calls)
        if best_gap is None or gap < best_gap:
            best, best_gap = interval, gap
    return best


def calibrate_jmax(
    x_init,
    schedule: Schedule,
    field: FieldSpec,
    params,
    target_calls: int,
    tolerance: float = 0.10,
    **sample_kwargs,
):
    """Search j_max downward from the configured cap until the adaptive run's
    call count lands within ``tolerance`` of the target; returns the best
    (params, calls) pair by closeness."""
    best = None
    for j in range(params.j_max, 0, -1):
        candidate = replace(params, j_max=j)
        handle = make_field(field)
        _, stats = sample(x_init, schedule, handle, candidate, **sample_kwargs)
        gap = abs(stats.oracle_calls - target_calls)
        if best is None or gap < best[2]:
            best = (candidate, stats.oracle_calls, gap)
    candidate, calls, gap = best
    if gap > tolerance * target_calls:
        raise ConfigurationError(
            f"no j_max in 1..{params.j_max} reaches {target_calls} calls "
            f"within {tolerance:.0%} (closest: {calls})"
        )
    return candidate, calls
