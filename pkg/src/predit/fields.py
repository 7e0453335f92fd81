"""Synthetic vector fields with known exact solutions, plus trajectory replay.

Each field stands in for an expensive model evaluation f(x, t). Handles
count their evaluations so run statistics can be audited against the
oracle's own ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from predit.errors import (
    ConfigurationError,
    TrajectoryFormatError,
    TrajectoryRangeError,
)

FIELD_KINDS = ("constant", "linear", "cosine", "polytime", "nonuniform", "replay")


class OracleHandle:
    """Counting wrapper around a vector-field evaluation.

    ``func`` is the uncounted evaluation (used by reference solvers);
    calling the handle itself increments ``calls``.
    """

    def __init__(
        self,
        func: Callable[[np.ndarray, float], np.ndarray],
        dim: int,
        exact: Callable[[np.ndarray, float, float], np.ndarray] | None = None,
        label: str = "oracle",
    ):
        self.func = func
        self.dim = int(dim)
        self.exact = exact
        self.label = label
        self.calls = 0

    def __call__(self, x, t: float) -> np.ndarray:
        self.calls += 1
        return self.func(x, t)

    # spec vocabulary alias
    def eval(self, x, t: float) -> np.ndarray:
        return self(x, t)

    def __repr__(self) -> str:
        return f"OracleHandle({self.label}, dim={self.dim}, calls={self.calls})"


@dataclass(frozen=True)
class FieldSpec:
    """Declarative field description resolvable to an OracleHandle.

    Only the parameters relevant to ``kind`` are read:
    constant -> value; linear -> decay; polytime -> degree;
    nonuniform -> a, b, direction; replay -> source, interpolation.
    """

    kind: str
    dim: int = 1
    value: float | Sequence[float] = 1.0
    decay: float = 1.0
    degree: int = 2
    a: float = 1.0
    b: float = 4.0
    direction: Sequence[float] | None = None
    source: "RecordedTrajectory | None" = None
    interpolation: str = "nearest"


@dataclass(frozen=True)
class RecordedTrajectory:
    """Model outputs recorded along a schedule; drives the replay oracle."""

    times: np.ndarray
    values: np.ndarray
    metadata: str = ""

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise TrajectoryFormatError("values must be a 2-D (n, dim) array")
        if times.shape[0] != values.shape[0]:
            raise TrajectoryFormatError(
                f"{times.shape[0]} times vs {values.shape[0]} value rows"
            )
        if times.shape[0] == 0:
            raise TrajectoryFormatError("trajectory is empty")
        diffs = np.diff(times)
        if times.shape[0] > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise TrajectoryFormatError("times must be strictly monotone")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def _unit_direction(spec: FieldSpec) -> np.ndarray:
    if spec.direction is None:
        u = np.ones(spec.dim, dtype=np.float64)
    else:
        u = np.asarray(spec.direction, dtype=np.float64).reshape(-1)
        if u.shape[0] != spec.dim:
            raise ConfigurationError(
                f"direction has dim {u.shape[0]}, field has dim {spec.dim}"
            )
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        raise ConfigurationError("direction vector must be nonzero")
    return u / norm


def make_field(spec: FieldSpec) -> OracleHandle:
    """Resolve a FieldSpec to a counting oracle with its exact solution."""
    if spec.kind == "constant":
        c = np.asarray(spec.value, dtype=np.float64).reshape(-1)
        if c.shape[0] == 1 and spec.dim > 1:
            c = np.full(spec.dim, float(c[0]))
        if c.shape[0] != spec.dim:
            raise ConfigurationError(
                f"constant value has dim {c.shape[0]}, field has dim {spec.dim}"
            )

        def func(x, t, c=c):
            return c.copy()

        def exact(x0, t0, t, c=c):
            return np.asarray(x0, dtype=np.float64) + (t - t0) * c

        return OracleHandle(func, spec.dim, exact, label=f"constant({c.tolist()})")

    if spec.kind == "linear":
        lam = float(spec.decay)

        def func(x, t, lam=lam):
            return -lam * np.asarray(x, dtype=np.float64)

        def exact(x0, t0, t, lam=lam):
            return np.asarray(x0, dtype=np.float64) * math.exp(-lam * (t - t0))

        return OracleHandle(func, spec.dim, exact, label=f"linear({lam})")

    if spec.kind == "cosine":

        def func(x, t):
            return np.full(spec.dim, math.cos(t))

        def exact(x0, t0, t):
            return np.asarray(x0, dtype=np.float64) + (math.sin(t) - math.sin(t0))

        return OracleHandle(func, spec.dim, exact, label="cosine")

    if spec.kind == "polytime":
        m = int(spec.degree)
        if m < 0:
            raise ConfigurationError(f"polytime degree must be >= 0, got {m}")

        def func(x, t, m=m):
            return np.full(spec.dim, float(t) ** m)

        def exact(x0, t0, t, m=m):
            inc = (float(t) ** (m + 1) - float(t0) ** (m + 1)) / (m + 1)
            return np.asarray(x0, dtype=np.float64) + inc

        return OracleHandle(func, spec.dim, exact, label=f"polytime({m})")

    if spec.kind == "nonuniform":
        # g(t) = a * (1 + b*(2t-1)^2): change rate dips in the middle of
        # [0, 1] and rises toward both ends.
        a, b = float(spec.a), float(spec.b)
        u = _unit_direction(spec)

        def g(t, a=a, b=b):
            return a * (1.0 + b * (2.0 * t - 1.0) ** 2)

        def g_antiderivative(t, a=a, b=b):
            return a * (t + b * (2.0 * t - 1.0) ** 3 / 6.0)

        def func(x, t, u=u):
            return g(t) * u

        def exact(x0, t0, t, u=u):
            return np.asarray(x0, dtype=np.float64) + (
                g_antiderivative(t) - g_antiderivative(t0)
            ) * u

        return OracleHandle(func, spec.dim, exact, label=f"nonuniform(a={a}, b={b})")

    if spec.kind == "replay":
        if spec.source is None:
            raise ConfigurationError("replay field needs a source trajectory")
        return replay_oracle(spec.source, spec.interpolation)

    raise ConfigurationError(f"unknown field kind {spec.kind!r}")


def replay_oracle(traj: RecordedTrajectory, interpolation: str = "nearest") -> OracleHandle:
    """Oracle that replays a recorded trajectory; the state argument is ignored.

    ``nearest`` resolves exact midpoints to the earlier (first recorded)
    sample; ``linear`` interpolates between neighbours. Times outside the
    recorded range raise TrajectoryRangeError.
    """
    if interpolation not in ("nearest", "linear"):
        raise ConfigurationError(
            f"unknown interpolation {interpolation!r} (nearest or linear)"
        )
    times = traj.times
    values = traj.values
    ascending = times[-1] >= times[0]
    lo = min(times[0], times[-1])
    hi = max(times[0], times[-1])

    def locate(t: float) -> np.ndarray:
        if t < lo or t > hi:
            raise TrajectoryRangeError(
                f"t={t!r} outside recorded range [{lo!r}, {hi!r}]"
            )
        ts = times if ascending else times[::-1]
        vs = values if ascending else values[::-1]
        i = int(np.searchsorted(ts, t))
        if i < len(ts) and ts[i] == t:
            return vs[i].copy()
        left, right = i - 1, i
        if interpolation == "nearest":
            d_left = t - ts[left]
            d_right = ts[right] - t
            if d_left == d_right:
                # tie: earlier sample in recording order
                pick = left if ascending else right
            else:
                pick = left if d_left < d_right else right
            return vs[pick].copy()
        frac = (t - ts[left]) / (ts[right] - ts[left])
        return vs[left] + frac * (vs[right] - vs[left])

    def func(x, t):
        return locate(float(t))

    return OracleHandle(func, traj.dim, exact=None, label=f"replay({interpolation})")


TRAJ_HEADER_PREFIX = "predit-traj v1"


def write_trajectory(path, traj: RecordedTrajectory) -> None:
    """Write the self-describing columnar text format:
    header ``predit-traj v1 dim=<d> n=<N>``, then one ``t v1 .. vd`` row per sample."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{TRAJ_HEADER_PREFIX} dim={traj.dim} n={len(traj.times)}\n")
        for t, row in zip(traj.times, traj.values):
            cols = " ".join(repr(float(v)) for v in row)
            fh.write(f"{repr(float(t))} {cols}\n")


def read_trajectory(path) -> RecordedTrajectory:
    """Parse the trajectory text format, rejecting shape mismatches."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        parts = header.split()
        if (
            len(parts) != 4
            or " ".join(parts[:2]) != TRAJ_HEADER_PREFIX
            or not parts[2].startswith("dim=")
            or not parts[3].startswith("n=")
        ):
            raise TrajectoryFormatError(f"bad trajectory header: {header!r}")
        try:
            dim = int(parts[2][4:])
            n = int(parts[3][2:])
        except ValueError as exc:
            raise TrajectoryFormatError(f"bad trajectory header: {header!r}") from exc
        times = []
        values = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            cols = line.split()
            if len(cols) != dim + 1:
                raise TrajectoryFormatError(
                    f"line {lineno}: expected {dim + 1} columns, got {len(cols)}"
                )
            try:
                times.append(float(cols[0]))
                values.append([float(c) for c in cols[1:]])
            except ValueError as exc:
                raise TrajectoryFormatError(f"line {lineno}: non-numeric column") from exc
        if len(times) != n:
            raise TrajectoryFormatError(
                f"header declares n={n} rows, file has {len(times)}"
            )
    return RecordedTrajectory(
        times=np.array(times), values=np.array(values).reshape(len(times), dim)
    )
