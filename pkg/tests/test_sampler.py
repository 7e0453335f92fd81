"""End-to-end sampler behavior: warm-up, branching, skipping, baselines."""

import math

import numpy as np
import pytest

from predit import (
    Branch,
    ConfigurationError,
    FieldSpec,
    History,
    OracleFailure,
    PolicyParams,
    Schedule,
    ab_fixed_sample,
    abm_fixed_sample,
    abm_step,
    euler_sample,
    make_field,
    reuse_sample,
    sample,
)

DEFAULTS = PolicyParams()  # order 2, tau 2, ratio 0.3, p 1, eps 1e-8, j_max 8


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        Schedule(np.array([0.0]))
    with pytest.raises(ConfigurationError):
        Schedule(np.array([0.0, 1.0, 0.5]))
    with pytest.raises(ConfigurationError):
        Schedule(np.array([0.0, np.inf]))
    s = Schedule(np.array([1.0, 0.5, 0.0]))
    assert s.direction == -1
    assert s.n_steps == 2


def test_cosine_ramp_schedule_monotone():
    s = Schedule.cosine_ramp(0.0, 1.0, 25)
    assert s.n_steps == 25
    assert np.all(np.diff(s.times) > 0)
    # denser near both ends than in the middle
    assert s.times[1] - s.times[0] < s.times[13] - s.times[12]


def test_constant_field_exact_for_any_params():
    rng = np.random.default_rng(2)
    for _ in range(10):
        params = PolicyParams(
            order=int(rng.integers(1, 5)),
            tau=float(rng.uniform(0.1, 5.0)),
            ratio=float(rng.uniform(0.05, 0.95)),
            sensitivity=int(rng.integers(0, 3)),
            j_max=int(rng.integers(1, 10)),
        )
        field = make_field(FieldSpec("constant", dim=2, value=[1.0, -2.0]))
        sched = Schedule.uniform(0.0, 1.0, 37)
        x_final, _ = sample(np.zeros(2), sched, field, params)
        assert x_final == pytest.approx([1.0, -2.0], rel=1e-10)


def test_constant_field_hand_traced_calls():
    # order 2, N=50, j_max=8: warm-up consumes 1 step (2 calls), every later
    # computed step sees delta=0 and predicts with the full skip; computed
    # steps land at n = 1, 10, 19, 28, 37, 46
    field = make_field(FieldSpec("constant", dim=1, value=1.0))
    sched = Schedule.uniform(0.0, 1.0, 50)
    x_final, stats = sample(np.zeros(1), sched, field, DEFAULTS)
    assert stats.oracle_calls == 8
    assert stats.oracle_calls == field.calls
    assert stats.skip_histogram == {0: 1, 8: 6}
    computed = [r.index for r in stats.decision_trace if r.computed]
    assert computed == [0, 1, 10, 19, 28, 37, 46]
    warmup_steps = sum(1 for r in stats.decision_trace if r.warmup)
    assert warmup_steps == 1
    bound = warmup_steps + math.ceil((50 - warmup_steps) / (DEFAULTS.j_max + 1)) + 1
    assert stats.oracle_calls <= bound


def test_trace_covers_every_step():
    field = make_field(FieldSpec("linear", dim=1, decay=1.0))
    sched = Schedule.uniform(0.0, 1.0, 40)
    _, stats = sample([1.0], sched, field, DEFAULTS, record_x_trace=True)
    assert stats.steps_total == 40
    assert len(stats.decision_trace) == 40
    assert len(stats.x_trace) == 41
    assert [r.index for r in stats.decision_trace] == list(range(40))


def test_skip_ceiling_never_exceeded():
    field = make_field(FieldSpec("nonuniform", dim=1, a=1.0, b=4.0))
    sched = Schedule.uniform(0.0, 1.0, 120)
    _, stats = sample([0.0], sched, field, PolicyParams(j_max=5))
    assert all(r.skip <= 5 for r in stats.decision_trace)
    # consecutive skipped steps between computes never exceed j_max
    run = 0
    for r in stats.decision_trace:
        if r.computed:
            run = 0
        else:
            run += 1
            assert run <= 5


def test_oracle_calls_match_handle_for_every_policy():
    sched = Schedule.uniform(0.0, 1.0, 60)
    policies = [
        lambda f: sample([1.0], sched, f, DEFAULTS),
        lambda f: euler_sample([1.0], sched, f),
        lambda f: reuse_sample([1.0], sched, f, 4),
        lambda f: ab_fixed_sample([1.0], sched, f, 4, 2),
        lambda f: abm_fixed_sample([1.0], sched, f, 4, 2),
    ]
    for run in policies:
        field = make_field(FieldSpec("linear", dim=1, decay=1.0))
        _, stats = run(field)
        assert stats.oracle_calls == field.calls


def test_adaptive_run_beats_plain_stepping_budget_and_error():
    # tau large: aggressive skipping must still beat one-call-per-step
    # first-order integration on accuracy
    field_spec = FieldSpec("linear", dim=1, decay=1.0)
    sched = Schedule.uniform(0.0, 1.0, 100)
    exact = math.exp(-1.0)

    adaptive_field = make_field(field_spec)
    x_adaptive, stats = sample([1.0], sched, adaptive_field, DEFAULTS)
    euler_field = make_field(field_spec)
    x_euler, euler_stats = euler_sample([1.0], sched, euler_field)

    assert stats.oracle_calls < euler_stats.oracle_calls
    assert abs(x_adaptive[0] - exact) < abs(x_euler[0] - exact)


def test_degenerate_policy_matches_pure_abm_bit_for_bit():
    # tau below every observed delta forces the correcting branch each step;
    # the run must equal a hand-rolled predict-evaluate-correct loop exactly
    field_spec = FieldSpec("linear", dim=1, decay=1.0)
    params = PolicyParams(order=2, tau=1e-12, ratio=0.3)
    sched = Schedule.uniform(0.0, 1.0, 25)

    field = make_field(field_spec)
    x_final, stats = sample([1.0], sched, field, params)

    # reference loop: same warm-up ramp, corrector every step
    ref_field = make_field(field_spec)
    history = History(dim=1)
    x = np.array([1.0])
    times = sched.times
    for n in range(sched.n_steps):
        t_n, t_next = float(times[n]), float(times[n + 1])
        f_n = ref_field(x, t_n)
        if len(history) and history.newest.t == t_n:
            history.replace_newest(f_n)
        else:
            history.push(t_n, f_n)
        order = min(params.order, len(history))
        x, f_tilde = abm_step(x, history, t_next, ref_field, order)
        history.push(t_next, f_tilde)

    assert np.array_equal(x_final, x)
    assert stats.oracle_calls == ref_field.calls
    branches = {r.branch for r in stats.decision_trace if r.computed}
    assert branches == {Branch.FULL_ABM}
    warmup_calls = 2
    computed_after_warmup = sum(
        1 for r in stats.decision_trace if r.computed and not r.warmup
    )
    assert stats.oracle_calls == warmup_calls + 2 * computed_after_warmup


def test_direction_agnostic_final_errors_match():
    # forward decay on [0, 1] vs the time-reversed equivalent on [1, 0]
    n = 80
    fwd_field = make_field(FieldSpec("linear", dim=1, decay=1.0))
    fwd_sched = Schedule.uniform(0.0, 1.0, n)
    x_fwd, _ = sample([1.0], fwd_sched, fwd_field, DEFAULTS)
    err_fwd = abs(x_fwd[0] - math.exp(-1.0))

    bwd_field = make_field(FieldSpec("linear", dim=1, decay=-1.0))  # f = +x
    bwd_sched = Schedule.uniform(1.0, 0.0, n)
    x_bwd, _ = sample([1.0], bwd_sched, bwd_field, DEFAULTS)
    err_bwd = abs(x_bwd[0] - math.exp(-1.0))

    assert abs(err_fwd - err_bwd) < 1e-12


def test_oracle_failure_carries_step_index():
    calls = {"n": 0}

    class Boom(Exception):
        pass

    def flaky(x, t):
        calls["n"] += 1
        if calls["n"] == 9:
            raise Boom("synthetic outage")
        return np.array([-x[0]])

    sched = Schedule.uniform(0.0, 1.0, 20)
    # tiny tau forces the full-compute branch: two evaluations per step,
    # so the ninth evaluation happens while processing step 4
    params = PolicyParams(order=2, tau=1e-12, ratio=0.3)
    with pytest.raises(OracleFailure) as excinfo:
        sample([1.0], sched, flaky, params)
    assert excinfo.value.step == 4
    assert "step 4" in str(excinfo.value)
    assert isinstance(excinfo.value.cause, Boom)


def test_empty_schedule_rejected():
    with pytest.raises(ConfigurationError):
        Schedule(np.array([]))


def test_unknown_mode_rejected():
    field = make_field(FieldSpec("constant", dim=1))
    with pytest.raises(ConfigurationError):
        sample([0.0], Schedule.uniform(0, 1, 4), field, DEFAULTS, mode="bogus")


# ---------------------------------------------------------------------------
# baselines

def test_euler_calls_equal_steps():
    field = make_field(FieldSpec("linear", dim=1, decay=1.0))
    sched = Schedule.uniform(0.0, 1.0, 100)
    x, stats = euler_sample([1.0], sched, field)
    assert stats.oracle_calls == 100
    # order-1 error on dx/dt = -x at h = 0.01
    assert abs(x[0] - math.exp(-1.0)) == pytest.approx(1.8e-3, rel=0.2)


def test_reuse_interval_one_is_euler_bitwise():
    sched = Schedule.uniform(0.0, 1.0, 50)
    f1 = make_field(FieldSpec("linear", dim=1, decay=1.0))
    f2 = make_field(FieldSpec("linear", dim=1, decay=1.0))
    x_reuse, s_reuse = reuse_sample([1.0], sched, f1, 1)
    x_euler, s_euler = euler_sample([1.0], sched, f2)
    assert np.array_equal(x_reuse, x_euler)
    assert s_reuse.oracle_calls == s_euler.oracle_calls


def test_ab_fixed_interval_one_order_one_is_euler_bitwise():
    sched = Schedule.uniform(0.0, 1.0, 50)
    f1 = make_field(FieldSpec("linear", dim=1, decay=1.0))
    f2 = make_field(FieldSpec("linear", dim=1, decay=1.0))
    x_ab, _ = ab_fixed_sample([1.0], sched, f1, 1, 1)
    x_euler, _ = euler_sample([1.0], sched, f2)
    assert np.array_equal(x_ab, x_euler)


@pytest.mark.parametrize("runner", ["reuse", "abfixed", "abmfixed"])
def test_fixed_baselines_exact_on_constant(runner):
    sched = Schedule.uniform(0.0, 2.0, 30)
    field = make_field(FieldSpec("constant", dim=2, value=[0.5, -0.5]))
    if runner == "reuse":
        x, _ = reuse_sample(np.ones(2), sched, field, 5)
    elif runner == "abfixed":
        x, _ = ab_fixed_sample(np.ones(2), sched, field, 5, 2)
    else:
        x, _ = abm_fixed_sample(np.ones(2), sched, field, 5, 2)
    assert x == pytest.approx([2.0, 0.0], rel=1e-12)


def test_fixed_baseline_call_budgets():
    sched = Schedule.uniform(0.0, 1.0, 100)
    f1 = make_field(FieldSpec("linear", dim=1, decay=1.0))
    _, s1 = reuse_sample([1.0], sched, f1, 4)
    assert s1.oracle_calls == 25
    f2 = make_field(FieldSpec("linear", dim=1, decay=1.0))
    _, s2 = ab_fixed_sample([1.0], sched, f2, 4, 2)
    assert s2.oracle_calls == 25
    f3 = make_field(FieldSpec("linear", dim=1, decay=1.0))
    _, s3 = abm_fixed_sample([1.0], sched, f3, 4, 2)
    assert s3.oracle_calls == 50  # corrector doubles the evaluation cost


def test_prediction_beats_reuse_at_same_interval():
    # the drift comparison this baseline exists for
    sched = Schedule.uniform(0.0, 1.0, 100)
    exact = math.exp(-1.0)
    f1 = make_field(FieldSpec("linear", dim=1, decay=1.0))
    x_reuse, _ = reuse_sample([1.0], sched, f1, 4)
    f2 = make_field(FieldSpec("linear", dim=1, decay=1.0))
    x_ab, _ = ab_fixed_sample([1.0], sched, f2, 4, 2)
    assert abs(x_ab[0] - exact) < abs(x_reuse[0] - exact)


def test_interval_validation():
    sched = Schedule.uniform(0.0, 1.0, 10)
    field = make_field(FieldSpec("constant", dim=1))
    with pytest.raises(ConfigurationError):
        reuse_sample([0.0], sched, field, 0)


# ---------------------------------------------------------------------------
# modes and flags

def test_ab_dsm_mode_never_corrects():
    field = make_field(FieldSpec("nonuniform", dim=1, a=1.0, b=16.0))
    sched = Schedule.uniform(0.0, 1.0, 100)
    _, stats = sample([0.0], sched, field, PolicyParams(tau=0.3), mode="ab_dsm")
    branches = {r.branch for r in stats.decision_trace if r.computed}
    assert branches == {Branch.AB_WITH_SKIP}


def test_abm_only_mode_computes_every_step():
    field = make_field(FieldSpec("nonuniform", dim=1, a=1.0, b=16.0))
    sched = Schedule.uniform(0.0, 1.0, 50)
    _, stats = sample([0.0], sched, field, DEFAULTS, mode="abm_only")
    assert all(r.computed for r in stats.decision_trace)
    assert stats.oracle_calls == 100


def test_abm_dsm_mode_corrects_and_skips():
    field = make_field(FieldSpec("nonuniform", dim=1, a=1.0, b=16.0))
    sched = Schedule.uniform(0.0, 1.0, 100)
    _, stats = sample([0.0], sched, field, PolicyParams(tau=0.3), mode="abm_dsm")
    computed = [r for r in stats.decision_trace if r.computed and not r.warmup]
    assert all(r.branch in (Branch.ABM_WITH_SKIP, Branch.FULL_ABM) for r in computed)
    assert any(not r.computed for r in stats.decision_trace)  # skipping happened


def test_literal_history_mode_stores_only_main_loop_samples():
    # with the literal flag the corrector evaluation is used but not stored,
    # so the warm-up ramp needs one extra step and calls differ
    field_spec = FieldSpec("linear", dim=1, decay=1.0)
    sched = Schedule.uniform(0.0, 1.0, 30)
    f1 = make_field(field_spec)
    x_default, s_default = sample([1.0], sched, f1, DEFAULTS)
    f2 = make_field(field_spec)
    x_literal, s_literal = sample([1.0], sched, f2, DEFAULTS, history_literal_alg1=True)
    warm_default = sum(1 for r in s_default.decision_trace if r.warmup)
    warm_literal = sum(1 for r in s_literal.decision_trace if r.warmup)
    assert warm_literal == warm_default + 1
    assert x_literal[0] == pytest.approx(math.exp(-1.0), rel=5e-2)
    assert x_literal[0] != x_default[0]


def test_uniform_coefficient_mode_breaks_polynomial_exactness():
    # f(t) = t is integrated exactly by node-exact order-2 weights however
    # stale the history; classical uniform rows scaled by the current step
    # width assume adjacent nodes and lose that exactness under skipping
    field_spec = FieldSpec("polytime", dim=1, degree=1)
    sched = Schedule.uniform(0.0, 1.0, 100)
    exact = 0.5  # integral of t over [0, 1]
    f1 = make_field(field_spec)
    x_exact_w, s1 = sample([0.0], sched, f1, DEFAULTS)
    f2 = make_field(field_spec)
    x_uniform_w, s2 = sample([0.0], sched, f2, DEFAULTS, uniform_coefficients=True)
    assert s1.oracle_calls == s2.oracle_calls
    assert abs(x_exact_w[0] - exact) < 1e-10
    assert abs(x_uniform_w[0] - exact) > 1e-4


def test_warmup_ramp_orders():
    field = make_field(FieldSpec("linear", dim=1, decay=1.0))
    sched = Schedule.uniform(0.0, 1.0, 30)
    _, stats = sample([1.0], sched, field, PolicyParams(order=4, tau=2.0))
    warm = [r for r in stats.decision_trace if r.warmup]
    assert [r.order_used for r in warm] == [1, 2, 3]
    assert all(r.branch is Branch.FULL_ABM for r in warm)
