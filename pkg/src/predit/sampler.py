"""End-to-end forecasting sampler and the fixed-interval baselines.

The main loop spends oracle calls only where the feature trajectory bends:
each computed step measures the relative change rate, decides whether to
run the corrector, and how many following steps may be advanced by pure
extrapolation from the cached history. Baselines (plain stepping,
zero-order reuse, fixed-interval extrapolation) share the same statistics
plumbing so runs compare like for like.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from predit.dynamics import (
    Branch,
    PolicyParams,
    StepDecision,
    change_rate,
    decide,
    skip_interval,
)
from predit.errors import ConfigurationError, OracleFailure
from predit.multistep import (
    History,
    ab_step,
    abm_step,
    uniform_ab_weights,
    uniform_am_weights,
)
from predit._kernels import weighted_step

MODES = ("predit", "ab_dsm", "abm_dsm", "abm_only")


@dataclass(frozen=True)
class Schedule:
    """Strictly monotone step times t_0 .. t_N (increasing or decreasing)."""

    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        if times.shape[0] < 2:
            raise ConfigurationError(
                f"schedule needs at least 2 times, got {times.shape[0]}"
            )
        if not np.all(np.isfinite(times)):
            raise ConfigurationError("schedule times must be finite")
        diffs = np.diff(times)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ConfigurationError("schedule times must be strictly monotone")
        object.__setattr__(self, "times", times)

    @property
    def n_steps(self) -> int:
        return self.times.shape[0] - 1

    @property
    def direction(self) -> int:
        return 1 if self.times[1] > self.times[0] else -1

    @staticmethod
    def uniform(t_start: float, t_end: float, n_steps: int) -> "Schedule":
        return Schedule(np.linspace(t_start, t_end, n_steps + 1))

    @staticmethod
    def cosine_ramp(t_start: float, t_end: float, n_steps: int) -> "Schedule":
        """Denser steps near both ends (half-cosine spacing)."""
        i = np.arange(n_steps + 1, dtype=np.float64)
        frac = 0.5 * (1.0 - np.cos(np.pi * i / n_steps))
        return Schedule(t_start + (t_end - t_start) * frac)


@dataclass
class StepRecord:
    """One schedule step in the decision trace."""

    index: int
    t: float
    computed: bool
    branch: Branch | None = None
    delta: float | None = None
    skip: int = 0
    order_used: int | None = None
    warmup: bool = False


@dataclass
class RunStats:
    """Per-run accounting: call count, skip histogram, decisions, snapshots."""

    oracle_calls: int = 0
    steps_total: int = 0
    skip_histogram: dict[int, int] = field(default_factory=dict)
    decision_trace: list[StepRecord] = field(default_factory=list)
    x_trace: list[np.ndarray] | None = None

    def record_decision(self, rec: StepRecord) -> None:
        self.decision_trace.append(rec)
        if rec.computed:
            self.skip_histogram[rec.skip] = self.skip_histogram.get(rec.skip, 0) + 1

    def as_dict(self) -> dict:
        out = {
            "oracle_calls": self.oracle_calls,
            "steps_total": self.steps_total,
            "skip_histogram": {str(k): v for k, v in sorted(self.skip_histogram.items())},
            "decisions": [
                {
                    "index": r.index,
                    "t": r.t,
                    "computed": r.computed,
                    "branch": r.branch.value if r.branch is not None else None,
                    "delta": r.delta,
                    "skip": r.skip,
                    "order_used": r.order_used,
                    "warmup": r.warmup,
                }
                for r in self.decision_trace
            ],
        }
        if self.x_trace is not None:
            out["x_trace"] = [x.tolist() for x in self.x_trace]
        return out


class _CountedOracle:
    """Tags oracle exceptions with the schedule step and keeps a local call
    count so stats do not depend on the handle's own bookkeeping."""

    def __init__(self, oracle: Callable[[np.ndarray, float], np.ndarray]):
        self.oracle = oracle
        self.calls = 0
        self.step = 0

    def __call__(self, x, t: float) -> np.ndarray:
        try:
            f = self.oracle(x, t)
        except Exception as exc:
            raise OracleFailure(self.step, t, exc) from exc
        self.calls += 1
        return np.asarray(f, dtype=np.float64).reshape(-1)


def _init_state(x_init, schedule: Schedule):
    x = np.array(x_init, dtype=np.float64, copy=True).reshape(-1)
    if x.shape[0] < 1:
        raise ConfigurationError("x_init must be a non-empty vector")
    return x


def _record_sample(history: History, t: float, f: np.ndarray) -> None:
    # A fresh evaluation at the corrected state supersedes the corrector-stage
    # sample recorded at the same time.
    if len(history) and history.newest.t == t:
        history.replace_newest(f)
    else:
        history.push(t, f)


def _uniform_ab_advance(x, history: History, t_cur: float, t_next: float, order: int):
    w = np.array(uniform_ab_weights(order)) * (t_next - t_cur)
    return weighted_step(x, history.recent_values(order), w)


def _uniform_abm_advance(x, history, t_cur, t_next, order, oracle):
    predicted = _uniform_ab_advance(x, history, t_cur, t_next, order)
    f_next = oracle(predicted, t_next)
    w = np.array(uniform_am_weights(order)) * (t_next - t_cur)
    values = np.concatenate((f_next[None, :], history.recent_values(order)))
    return weighted_step(x, values, w), f_next


def sample(
    x_init,
    schedule: Schedule,
    oracle,
    params: PolicyParams,
    *,
    mode: str = "predit",
    history_literal_alg1: bool = False,
    uniform_coefficients: bool = False,
    record_x_trace: bool = False,
) -> tuple[np.ndarray, RunStats]:
    """Run the adaptive predict/correct/skip loop over the schedule.

    Per step: if a skip balance remains, advance by explicit extrapolation
    from the cached history (zero oracle calls) and decrement it. Otherwise
    evaluate the oracle, measure the change rate against the previous
    output, and branch: full compute with correction, correction plus a
    short skip, or prediction plus an aggressive skip. Until the history
    holds ``params.order`` samples, steps run at reduced order with forced
    full compute.

    ``mode`` restricts the branch set for ablations: "ab_dsm" never
    corrects, "abm_dsm" always corrects (keeping adaptive skips),
    "abm_only" always corrects and never skips. ``history_literal_alg1``
    stores only the main-loop evaluation per computed step, discarding the
    corrector-stage evaluation. ``uniform_coefficients`` applies classical
    uniform-spacing weights scaled by the current step width instead of
    node-exact ones.
    """
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r} (one of {MODES})")
    x = _init_state(x_init, schedule)
    counted = _CountedOracle(oracle)
    history = History(dim=x.shape[0], capacity=max(8, 2 * params.order + 2))
    stats = RunStats(steps_total=schedule.n_steps)
    if record_x_trace:
        stats.x_trace = [x.copy()]

    times = schedule.times
    skip_remaining = 0
    last_f: np.ndarray | None = None

    def advance_ab(xv, t_cur, t_next, order):
        if uniform_coefficients:
            return _uniform_ab_advance(xv, history, t_cur, t_next, order)
        return ab_step(xv, history, t_next, order, t_current=t_cur)

    def advance_abm(xv, t_cur, t_next, order):
        if uniform_coefficients:
            return _uniform_abm_advance(xv, history, t_cur, t_next, order, counted)
        return abm_step(xv, history, t_next, counted, order, t_current=t_cur)

    for n in range(schedule.n_steps):
        counted.step = n
        t_n, t_next = float(times[n]), float(times[n + 1])

        if skip_remaining > 0:
            x = advance_ab(x, t_n, t_next, min(params.order, len(history)))
            skip_remaining -= 1
            stats.record_decision(StepRecord(index=n, t=t_n, computed=False))
            if stats.x_trace is not None:
                stats.x_trace.append(x.copy())
            continue

        warmup = len(history) < params.order
        f_n = counted(x, t_n)
        _record_sample(history, t_n, f_n)
        order_used = min(params.order, len(history))

        delta = None if last_f is None else change_rate(f_n, last_f, params.epsilon)

        if warmup:
            # forced full compute during the order ramp
            if mode == "ab_dsm":
                decision = StepDecision(Branch.AB_WITH_SKIP, 0)
            else:
                decision = StepDecision(Branch.FULL_ABM, 0)
        elif mode == "predit":
            decision = decide(math.inf if delta is None else delta, params)
        elif mode == "ab_dsm":
            j = skip_interval(math.inf if delta is None else delta, params)
            decision = StepDecision(Branch.AB_WITH_SKIP, j)
        elif mode == "abm_dsm":
            j = skip_interval(math.inf if delta is None else delta, params)
            decision = StepDecision(Branch.ABM_WITH_SKIP, j)
        else:  # abm_only
            decision = StepDecision(Branch.FULL_ABM, 0)

        if decision.branch is Branch.AB_WITH_SKIP:
            x = advance_ab(x, t_n, t_next, order_used)
        else:
            x, f_tilde = advance_abm(x, t_n, t_next, order_used)
            if not history_literal_alg1:
                history.push(t_next, f_tilde)
        # the change rate always compares consecutive main-loop outputs;
        # corrector-stage evaluations feed the history, never the metric
        last_f = f_n
        skip_remaining = decision.skip

        stats.record_decision(
            StepRecord(
                index=n,
                t=t_n,
                computed=True,
                branch=decision.branch,
                delta=delta,
                skip=decision.skip,
                order_used=order_used,
                warmup=warmup,
            )
        )
        if stats.x_trace is not None:
            stats.x_trace.append(x.copy())

    stats.oracle_calls = counted.calls
    return x, stats


def euler_sample(x_init, schedule: Schedule, oracle, *, record_x_trace: bool = False):
    """Plain forward stepping: one oracle call per step."""
    x = _init_state(x_init, schedule)
    counted = _CountedOracle(oracle)
    stats = RunStats(steps_total=schedule.n_steps)
    if record_x_trace:
        stats.x_trace = [x.copy()]
    times = schedule.times
    for n in range(schedule.n_steps):
        counted.step = n
        t_n, t_next = float(times[n]), float(times[n + 1])
        f_n = counted(x, t_n)
        x = x + (t_next - t_n) * f_n
        stats.record_decision(
            StepRecord(index=n, t=t_n, computed=True, order_used=1)
        )
        if stats.x_trace is not None:
            stats.x_trace.append(x.copy())
    stats.oracle_calls = counted.calls
    return x, stats


def reuse_sample(
    x_init,
    schedule: Schedule,
    oracle,
    interval: int,
    *,
    record_x_trace: bool = False,
):
    """Zero-order caching baseline: evaluate every ``interval`` steps and
    advance the steps in between with the stale cached output."""
    if interval < 1:
        raise ConfigurationError(f"interval must be >= 1, got {interval}")
    x = _init_state(x_init, schedule)
    counted = _CountedOracle(oracle)
    stats = RunStats(steps_total=schedule.n_steps)
    if record_x_trace:
        stats.x_trace = [x.copy()]
    times = schedule.times
    cached: np.ndarray | None = None
    for n in range(schedule.n_steps):
        counted.step = n
        t_n, t_next = float(times[n]), float(times[n + 1])
        computed = n % interval == 0
        if computed:
            cached = counted(x, t_n)
        x = x + (t_next - t_n) * cached
        stats.record_decision(StepRecord(index=n, t=t_n, computed=computed))
        if stats.x_trace is not None:
            stats.x_trace.append(x.copy())
    stats.oracle_calls = counted.calls
    return x, stats


def ab_fixed_sample(
    x_init,
    schedule: Schedule,
    oracle,
    interval: int,
    order: int,
    *,
    record_x_trace: bool = False,
):
    """Fixed-interval prediction baseline: evaluate every ``interval`` steps,
    extrapolate the steps in between from the cached history."""
    if interval < 1:
        raise ConfigurationError(f"interval must be >= 1, got {interval}")
    x = _init_state(x_init, schedule)
    counted = _CountedOracle(oracle)
    history = History(dim=x.shape[0], capacity=max(8, order + 2))
    stats = RunStats(steps_total=schedule.n_steps)
    if record_x_trace:
        stats.x_trace = [x.copy()]
    times = schedule.times
    for n in range(schedule.n_steps):
        counted.step = n
        t_n, t_next = float(times[n]), float(times[n + 1])
        computed = n % interval == 0
        if computed:
            f_n = counted(x, t_n)
            _record_sample(history, t_n, f_n)
        k = min(order, len(history))
        x = ab_step(x, history, t_next, k, t_current=t_n)
        stats.record_decision(
            StepRecord(index=n, t=t_n, computed=computed, order_used=k)
        )
        if stats.x_trace is not None:
            stats.x_trace.append(x.copy())
    stats.oracle_calls = counted.calls
    return x, stats


def abm_fixed_sample(
    x_init,
    schedule: Schedule,
    oracle,
    interval: int,
    order: int,
    *,
    record_x_trace: bool = False,
):
    """Fixed-interval predict-correct baseline: like ab_fixed_sample, but
    evaluation steps also run the corrector (two calls each)."""
    if interval < 1:
        raise ConfigurationError(f"interval must be >= 1, got {interval}")
    x = _init_state(x_init, schedule)
    counted = _CountedOracle(oracle)
    history = History(dim=x.shape[0], capacity=max(8, order + 2))
    stats = RunStats(steps_total=schedule.n_steps)
    if record_x_trace:
        stats.x_trace = [x.copy()]
    times = schedule.times
    for n in range(schedule.n_steps):
        counted.step = n
        t_n, t_next = float(times[n]), float(times[n + 1])
        computed = n % interval == 0
        if computed:
            f_n = counted(x, t_n)
            _record_sample(history, t_n, f_n)
            k = min(order, len(history))
            x, f_tilde = abm_step(x, history, t_next, counted, k, t_current=t_n)
            history.push(t_next, f_tilde)
        else:
            k = min(order, len(history))
            x = ab_step(x, history, t_next, k, t_current=t_n)
        stats.record_decision(
            StepRecord(index=n, t=t_n, computed=computed, order_used=k)
        )
        if stats.x_trace is not None:
            stats.x_trace.append(x.copy())
    stats.oracle_calls = counted.calls
    return x, stats
