"""Benchmark CLI: sampling runs, convergence studies, drift comparisons,
the synthetic ablation grid, and call-allocation profiles.

Configuration precedence: command-line flags override config-file values,
which override built-in defaults. Config files are flat ``key=value`` text,
one pair per line, ``#`` for comments; keys are the long flag names with
underscores. Unknown keys are rejected (exit 2).

The ``sample`` subcommand accepts ``--field stdio``, turning the process
into an oracle client: each evaluation writes ``EVAL <t> <x1> .. <xd>`` to
stdout and expects one whitespace-separated reply line (``<f1> .. <fd>``,
optionally prefixed ``OK``; ``ERR <message>`` aborts the run). The final
state and statistics are emitted as a ``RESULT <json>`` line. This is the
wire used by foreign-language bindings.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from predit import __version__
from predit.dynamics import PolicyParams
from predit.errorlab import (
    calibrate_interval,
    call_allocation_profile,
    convergence_study,
    drift_study,
    reference_solution,
    require_valid,
)
from predit.errors import (
    ConfigurationError,
    DegenerateStudyError,
    InvalidStudyError,
    OracleFailure,
    TrajectoryFormatError,
    TrajectoryRangeError,
)
from predit.fields import FieldSpec, OracleHandle, make_field, read_trajectory
from predit.multistep import MultistepError
from predit.sampler import (
    MODES,
    Schedule,
    ab_fixed_sample,
    abm_fixed_sample,
    euler_sample,
    reuse_sample,
    sample,
)

_POLICY_DEFAULTS = PolicyParams()

# frozen defaults for the ablation grid: strong end-dynamics so both the
# correction and prediction branches fire
_ABLATE_FIELD = "nonuniform:1.0:16.0"
_ABLATE_N = 100
_ABLATE_TAU = 0.3


def _fmt(value) -> str:
    """Stable scalar formatting for byte-reproducible CSV output."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: str, header, rows) -> None:
    out = sys.stdout if path == "-" else open(path, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    finally:
        if out is not sys.stdout:
            out.close()


def _write_json(path: str, payload) -> None:
    text = json.dumps(payload, indent=2)
    if path == "-":
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _parse_field(spec: str, dim: int, seed: int | None) -> FieldSpec:
    """Parse ``kind[:arg[:arg]]`` field descriptions."""
    parts = spec.split(":")
    kind = parts[0]
    args = parts[1:]
    direction = None
    if seed is not None:
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(dim)
        direction = vec / np.linalg.norm(vec)
    try:
        if kind == "constant":
            value = [float(v) for v in args[0].split(",")] if args else 1.0
            return FieldSpec("constant", dim=dim, value=value)
        if kind == "linear":
            return FieldSpec("linear", dim=dim, decay=float(args[0]) if args else 1.0)
        if kind == "cosine":
            return FieldSpec("cosine", dim=dim)
        if kind == "polytime":
            return FieldSpec("polytime", dim=dim, degree=int(args[0]) if args else 2)
        if kind == "nonuniform":
            a = float(args[0]) if len(args) > 0 else 1.0
            b = float(args[1]) if len(args) > 1 else 4.0
            return FieldSpec("nonuniform", dim=dim, a=a, b=b, direction=direction)
        if kind == "replay":
            if not args:
                raise ConfigurationError("replay field needs a file path: replay:PATH[:nearest|linear]")
            traj = read_trajectory(args[0])
            interp = args[1] if len(args) > 1 else "nearest"
            return FieldSpec("replay", dim=traj.dim, source=traj, interpolation=interp)
        if kind == "stdio":
            return FieldSpec("stdio", dim=dim)
    except (ValueError, IndexError) as exc:
        raise ConfigurationError(f"bad field spec {spec!r}: {exc}") from exc
    raise ConfigurationError(f"unknown field kind {kind!r}")


def _make_oracle(field_spec: FieldSpec) -> OracleHandle:
    if field_spec.kind == "stdio":
        return _stdio_oracle(field_spec.dim)
    return make_field(field_spec)


def _stdio_oracle(dim: int) -> OracleHandle:
    """Oracle client speaking the line protocol on stdin/stdout."""

    def func(x, t):
        cols = " ".join(repr(float(v)) for v in np.asarray(x, dtype=np.float64))
        sys.stdout.write(f"EVAL {repr(float(t))} {cols}\n")
        sys.stdout.flush()
        line = sys.stdin.readline()
        if not line:
            raise RuntimeError("oracle stream closed")
        parts = line.split()
        if parts and parts[0] == "ERR":
            raise RuntimeError(" ".join(parts[1:]) or "host oracle error")
        if parts and parts[0] == "OK":
            parts = parts[1:]
        if len(parts) != dim:
            raise RuntimeError(f"expected {dim} oracle values, got {len(parts)}")
        return np.array([float(p) for p in parts])

    return OracleHandle(func, dim, label="stdio")


def _parse_x0(text: str, dim: int) -> np.ndarray:
    vals = [float(v) for v in text.split(",")]
    if len(vals) == 1 and dim > 1:
        return np.full(dim, vals[0])
    if len(vals) != dim:
        raise ConfigurationError(f"x0 has dim {len(vals)}, field has dim {dim}")
    return np.array(vals)


def _build_schedule(args) -> Schedule:
    if getattr(args, "times", None):
        try:
            times = np.array([float(t) for t in args.times.split(",")])
        except ValueError as exc:
            raise ConfigurationError(f"bad --times value: {exc}") from exc
        return Schedule(times)
    if args.spacing == "uniform":
        return Schedule.uniform(args.t_start, args.t_end, args.n)
    if args.spacing == "cosine-ramp":
        return Schedule.cosine_ramp(args.t_start, args.t_end, args.n)
    raise ConfigurationError(f"unknown spacing {args.spacing!r}")


def _policy_params(args) -> PolicyParams:
    try:
        return PolicyParams(
            order=args.order,
            tau=args.tau,
            ratio=args.ratio,
            sensitivity=args.p,
            epsilon=args.eps,
            j_max=args.jmax,
        )
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc


def _sample_kwargs(args) -> dict:
    return {
        "mode": args.mode,
        "history_literal_alg1": args.literal_history,
        "uniform_coefficients": args.uniform_coeffs,
    }


def _policy_runner(spec: str, args):
    """Resolve a drift-policy description to (label, runner)."""
    parts = spec.split(":")
    name = parts[0]
    try:
        if name == "euler":
            return spec, lambda x0, sched, oracle, record_x_trace=False: euler_sample(
                x0, sched, oracle, record_x_trace=record_x_trace
            )
        if name == "reuse":
            interval = int(parts[1])
            return spec, lambda x0, sched, oracle, record_x_trace=False: reuse_sample(
                x0, sched, oracle, interval, record_x_trace=record_x_trace
            )
        if name == "abfixed":
            interval, order = int(parts[1]), int(parts[2]) if len(parts) > 2 else args.order
            return spec, lambda x0, sched, oracle, record_x_trace=False: ab_fixed_sample(
                x0, sched, oracle, interval, order, record_x_trace=record_x_trace
            )
        if name == "abmfixed":
            interval, order = int(parts[1]), int(parts[2]) if len(parts) > 2 else args.order
            return spec, lambda x0, sched, oracle, record_x_trace=False: abm_fixed_sample(
                x0, sched, oracle, interval, order, record_x_trace=record_x_trace
            )
        if name in ("predit",) + MODES:
            params = _policy_params(args)
            kwargs = _sample_kwargs(args)
            if name != "predit":
                kwargs["mode"] = name
            return spec, lambda x0, sched, oracle, record_x_trace=False: sample(
                x0, sched, oracle, params, record_x_trace=record_x_trace, **kwargs
            )
    except (ValueError, IndexError) as exc:
        raise ConfigurationError(f"bad policy spec {spec!r}: {exc}") from exc
    raise ConfigurationError(f"unknown policy {name!r}")


# ---------------------------------------------------------------------------
# subcommands

def cmd_sample(args) -> int:
    field_spec = _parse_field(args.field, args.dim, args.seed)
    schedule = _build_schedule(args)
    oracle = _make_oracle(field_spec)
    x0 = _parse_x0(args.x0, oracle.dim)
    params = _policy_params(args)
    stdio = field_spec.kind == "stdio"

    x_final, stats = sample(
        x0, schedule, oracle, params,
        record_x_trace=args.trace, **_sample_kwargs(args),
    )

    payload = {
        "experiment": "sample",
        "x_final": [float(v) for v in x_final],
        "stats": stats.as_dict(),
    }
    if oracle.exact is not None:
        ref = oracle.exact(x0, float(schedule.times[0]), float(schedule.times[-1]))
        payload["final_error"] = float(np.linalg.norm(x_final - ref))

    summary_out = sys.stderr if (stdio or args.json == "-") else sys.stdout
    hist = " ".join(f"J={j}:{c}" for j, c in sorted(stats.skip_histogram.items()))
    print(
        f"sample: {stats.oracle_calls} oracle calls over {stats.steps_total} steps"
        f" (skip histogram: {hist or 'none'})",
        file=summary_out,
    )
    if "final_error" in payload:
        print(f"final error vs exact: {payload['final_error']:.6e}", file=summary_out)

    if stdio:
        sys.stdout.write("RESULT " + json.dumps(payload) + "\n")
        sys.stdout.flush()
    if args.json:
        _write_json(args.json, payload)
    return 0


def cmd_converge(args) -> int:
    field_spec = _parse_field(args.field, args.dim, args.seed)
    step_counts = [int(s) for s in args.steps.split(",")]
    x0 = _parse_x0(args.x0, field_spec.dim)
    report = convergence_study(
        args.method, field_spec, (args.t_start, args.t_end), step_counts, x0
    )
    require_valid(report)
    print(
        f"converge: {args.method} slope {report.slope:.4f}"
        f" (intercept {report.intercept:.4f}, reference {report.reference})"
    )
    if args.csv:
        _write_csv(args.csv, report.CSV_FIELDS, report.csv_rows())
    if args.json:
        _write_json(args.json, report.to_json())
    return 0


def cmd_drift(args) -> int:
    field_spec = _parse_field(args.field, args.dim, args.seed)
    schedule = _build_schedule(args)
    x0 = _parse_x0(args.x0, field_spec.dim)
    reports = []
    for spec in args.policies.split(","):
        label, runner = _policy_runner(spec.strip(), args)
        report = drift_study(runner, field_spec, schedule, x0, label=label)
        require_valid(report)
        reports.append(report)
        print(
            f"drift: {label:16s} calls {report.oracle_calls:5d}"
            f"  accumulated {report.accumulated_drift:.6e}"
            f"  final {report.final_error:.6e}"
        )
    if args.csv:
        rows = [row for r in reports for row in r.csv_rows()]
        _write_csv(args.csv, reports[0].CSV_FIELDS, rows)
    if args.series_csv:
        rows = [row for r in reports for row in r.series_rows()]
        _write_csv(args.series_csv, ("policy", "index", "t", "error"), rows)
    if args.json:
        _write_json(args.json, {"study": "drift", "reports": [r.to_json() for r in reports]})
    return 0


def cmd_ablate(args) -> int:
    field_spec = _parse_field(args.field, args.dim, args.seed)
    schedule = _build_schedule(args)
    x0 = _parse_x0(args.x0, field_spec.dim)

    rows = []
    results = {}
    n_steps = schedule.n_steps

    def measure(label, runner, interval=None):
        report = drift_study(runner, field_spec, schedule, x0, label=label)
        require_valid(report)
        results[label] = report
        rows.append([
            label,
            interval if interval is not None else "-",
            report.oracle_calls,
            report.accumulated_drift,
            report.final_error,
            n_steps / report.oracle_calls,
        ])

    for mode in ("ab_dsm", "abm_only", "abm_dsm", "predit"):
        label, runner = _policy_runner(mode if mode != "predit" else "predit", args)
        measure(mode, runner)

    # fixed baselines at the adaptive run's call budget
    interval = calibrate_interval(results["predit"].oracle_calls, n_steps)
    for name in (f"reuse:{interval}", f"abfixed:{interval}:{args.order}"):
        label, runner = _policy_runner(name, args)
        measure(label, runner, interval)

    header = ("policy", "interval", "oracle_calls", "accumulated_drift", "final_error", "call_reduction")
    print(f"{'policy':18s} {'interval':>8s} {'calls':>6s} {'acc. drift':>12s} {'final err':>12s} {'N/calls':>8s}")
    for row in rows:
        print(
            f"{row[0]:18s} {str(row[1]):>8s} {row[2]:6d} {row[3]:12.4e} {row[4]:12.4e} {row[5]:8.2f}"
        )
    if args.csv:
        _write_csv(args.csv, header, rows)
    if args.json:
        _write_json(
            args.json,
            {
                "study": "ablate",
                "method": "grid",
                "params": {"field": args.field, "n": n_steps, "tau": args.tau},
                "rows": [dict(zip(header, row)) for row in rows],
            },
        )
    return 0


def cmd_profile(args) -> int:
    field_spec = _parse_field(args.field, args.dim, args.seed)
    schedule = _build_schedule(args)
    oracle = _make_oracle(field_spec)
    x0 = _parse_x0(args.x0, oracle.dim)
    params = _policy_params(args)
    _, stats = sample(x0, schedule, oracle, params, **_sample_kwargs(args))
    deciles = call_allocation_profile(stats, schedule)
    t0, t_end = float(schedule.times[0]), float(schedule.times[-1])
    rows = []
    for i, count in enumerate(deciles):
        lo = t0 + (t_end - t0) * i / 10.0
        hi = t0 + (t_end - t0) * (i + 1) / 10.0
        rows.append([i + 1, lo, hi, int(count)])
    print("decile  t_lo      t_hi      full_computes")
    for row in rows:
        print(f"{row[0]:>6d}  {row[1]:<8.4f}  {row[2]:<8.4f}  {row[3]}")
    print(f"total oracle calls: {stats.oracle_calls}")
    if args.csv:
        _write_csv(args.csv, ("decile", "t_lo", "t_hi", "full_computes"), rows)
    if args.json:
        _write_json(
            args.json,
            {
                "study": "profile",
                "method": "predit",
                "params": {"field": args.field, "n": schedule.n_steps},
                "rows": [
                    {"decile": r[0], "t_lo": r[1], "t_hi": r[2], "full_computes": r[3]}
                    for r in rows
                ],
                "oracle_calls": stats.oracle_calls,
            },
        )
    return 0


# ---------------------------------------------------------------------------
# parser plumbing

def _add_output_opts(p):
    p.add_argument("--csv", default=None, help="write results as CSV ('-' for stdout)")
    p.add_argument("--json", default=None, help="write results as JSON ('-' for stdout)")


def _add_field_opts(p, default_field):
    p.add_argument("--field", default=default_field,
                   help="field spec: constant[:c], linear[:decay], cosine, polytime[:m], "
                        "nonuniform[:a[:b]], replay:PATH[:nearest|linear], stdio")
    p.add_argument("--dim", type=int, default=1, help="state dimension")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for randomized field parameters (nonuniform direction)")
    p.add_argument("--x0", default="0.0", help="initial state: scalar or comma-separated vector")


def _add_schedule_opts(p, t_start, t_end, n):
    p.add_argument("--t-start", type=float, default=t_start, help="schedule start time")
    p.add_argument("--t-end", type=float, default=t_end, help="schedule end time")
    p.add_argument("--n", type=int, default=n, help="number of schedule steps")
    p.add_argument("--spacing", choices=("uniform", "cosine-ramp"), default="uniform",
                   help="schedule spacing")
    p.add_argument("--times", default=None,
                   help="explicit comma-separated schedule times (overrides the above)")


def _add_policy_opts(p, tau=_POLICY_DEFAULTS.tau):
    p.add_argument("--order", type=int, default=_POLICY_DEFAULTS.order, help="multistep order k")
    p.add_argument("--tau", type=float, default=tau, help="change-rate threshold")
    p.add_argument("--ratio", type=float, default=_POLICY_DEFAULTS.ratio, help="correction ratio r")
    p.add_argument("--p", type=int, default=_POLICY_DEFAULTS.sensitivity, help="sensitivity exponent")
    p.add_argument("--eps", type=float, default=_POLICY_DEFAULTS.epsilon, help="stability constant")
    p.add_argument("--jmax", type=int, default=_POLICY_DEFAULTS.j_max, help="skip-length cap")
    p.add_argument("--mode", choices=("predit",) + MODES, default="predit",
                   help="branch policy (ablation modes restrict the branch set)")
    p.add_argument("--literal-history", action="store_true",
                   help="store only main-loop evaluations (drop corrector samples)")
    p.add_argument("--uniform-coeffs", action="store_true",
                   help="use classical uniform-spacing weights scaled by the step width")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predit-bench",
        description="Forecasting-sampler benchmark harness",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run the adaptive sampler once and report stats",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_field_opts(p, "constant")
    _add_schedule_opts(p, 0.0, 1.0, 50)
    _add_policy_opts(p)
    _add_output_opts(p)
    p.add_argument("--trace", action="store_true", help="include per-step states in JSON output")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("converge", help="measure a method's convergence order",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--method", default="ab2",
                   help="euler, ab1..ab4, abm1..abm4 (amK-pece aliases accepted)")
    p.add_argument("--steps", default="40,80,160,320", help="comma-separated step counts")
    _add_field_opts(p, "cosine")
    _add_schedule_opts(p, 0.0, math.pi, 0)
    _add_output_opts(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("drift", help="compare per-step error and accumulated drift across policies",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--policies", default="reuse:4,abfixed:4:2",
                   help="comma-separated: euler, reuse:I, abfixed:I[:K], abmfixed:I[:K], "
                        "predit, ab_dsm, abm_dsm, abm_only")
    p.add_argument("--series-csv", default=None, help="write the per-step error series as CSV")
    _add_field_opts(p, "linear:1.0")
    _add_schedule_opts(p, 0.0, 1.0, 100)
    _add_policy_opts(p)
    _add_output_opts(p)
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("ablate", help="run the policy-ablation grid on one field",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_field_opts(p, _ABLATE_FIELD)
    _add_schedule_opts(p, 0.0, 1.0, _ABLATE_N)
    _add_policy_opts(p, tau=_ABLATE_TAU)
    _add_output_opts(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("profile", help="bucket full-compute steps into schedule deciles",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_field_opts(p, "nonuniform:1.0:4.0")
    _add_schedule_opts(p, 0.0, 1.0, 400)
    _add_policy_opts(p, tau=0.5)
    _add_output_opts(p)
    p.set_defaults(func=cmd_profile)

    return parser


def _load_config(path: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
                key, value = line.split("=", 1)
                pairs[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return pairs


_BOOL_FLAGS = {"literal_history", "uniform_coeffs", "trace"}


def _config_to_argv(config: dict[str, str], subcommand_parser) -> list[str]:
    """Translate config pairs to flags, rejecting keys unknown to the subcommand."""
    known = {
        opt.lstrip("-").replace("-", "_")
        for action in subcommand_parser._actions
        for opt in action.option_strings
    }
    tokens: list[str] = []
    for key, value in config.items():
        norm = key.replace("-", "_")
        if norm not in known:
            raise ConfigurationError(f"unknown config key: {key}")
        flag = "--" + norm.replace("_", "-")
        if norm in _BOOL_FLAGS:
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                tokens.append(flag)
            elif low in ("0", "false", "no", "off"):
                pass
            else:
                raise ConfigurationError(f"config key {key}: expected a boolean, got {value!r}")
        else:
            tokens.extend([flag, value])
    return tokens


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    # pull --config out first; its values become flags inserted right after
    # the subcommand so explicit command-line flags still win
    config_path = None
    stripped: list[str] = []
    i = 0
    while i < len(argv):
        if argv[i] == "--config":
            if i + 1 >= len(argv):
                print("error: --config needs a path", file=sys.stderr)
                return 2
            config_path = argv[i + 1]
            i += 2
        elif argv[i].startswith("--config="):
            config_path = argv[i].split("=", 1)[1]
            i += 1
        else:
            stripped.append(argv[i])
            i += 1

    try:
        if config_path is not None:
            if not stripped or stripped[0].startswith("-"):
                raise ConfigurationError("--config requires a subcommand")
            sub_actions = next(
                a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
            )
            sub_parser = sub_actions.choices.get(stripped[0])
            if sub_parser is None:
                raise ConfigurationError(f"unknown subcommand {stripped[0]!r}")
            config_tokens = _config_to_argv(_load_config(config_path), sub_parser)
            stripped = [stripped[0]] + config_tokens + stripped[1:]

        args = parser.parse_args(stripped)
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegenerateStudyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvalidStudyError as exc:
        print(f"error: invalid study: {exc}", file=sys.stderr)
        return 3
    except OracleFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (MultistepError, TrajectoryFormatError, TrajectoryRangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
