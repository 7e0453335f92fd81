"""Adams-Bashforth / Adams-Moulton kernels over arbitrarily spaced nodes.

Weights are generated per step by exact integration of the Lagrange basis
through the actual history node times, so the methods keep their
interpolation order under non-uniform schedules and under skipped steps
where the history grows stale relative to the current interval. On
uniformly spaced nodes the weights reduce to the classical beta/gamma
rows (times the step width).

Integration direction is free: schedules may run with increasing or
decreasing t, and all operations follow the direction established by the
history.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import math

import numpy as np

from predit._kernels import lagrange_weights, weighted_step

MAX_ORDER = 4


class MultistepError(Exception):
    """Base class for multistep kernel failures."""


class UnsupportedOrderError(MultistepError):
    """Requested order outside the supported 1..4 range."""


class DegenerateNodesError(MultistepError):
    """Interpolation nodes coincide; the Lagrange basis does not exist."""


class UnderfilledHistoryError(MultistepError):
    """History holds fewer samples than the requested order needs."""


class DimensionMismatchError(MultistepError):
    """Vector dimension disagrees with the owning history."""


@dataclass(frozen=True)
class NodeSample:
    """A timestamped model-output vector: one node of the solver's memory."""

    t: float
    f: np.ndarray

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise ValueError(f"sample time must be finite, got {self.t!r}")


class History:
    """Bounded buffer of NodeSamples, index 0 = most recent.

    Times must be strictly monotone along the sampling direction (set by
    the first two pushes) and unique. When full, the oldest sample is
    dropped.
    """

    def __init__(self, dim: int, capacity: int = 8):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        if capacity < MAX_ORDER:
            raise ValueError(
                f"capacity must be at least {MAX_ORDER}, got {capacity}"
            )
        self.dim = int(dim)
        self.capacity = int(capacity)
        self._samples: list[NodeSample] = []

    def __len__(self) -> int:
        return len(self._samples)

    def __getitem__(self, i: int) -> NodeSample:
        return self._samples[i]

    @property
    def newest(self) -> NodeSample:
        return self._samples[0]

    @property
    def direction(self) -> int | None:
        """+1 / -1 once two samples exist, None before that."""
        if len(self._samples) < 2:
            return None
        return 1 if self._samples[0].t > self._samples[1].t else -1

    def push(self, t: float, f) -> None:
        """Add a sample at the new most-recent position."""
        f = self._coerce(f)
        t = float(t)
        if not math.isfinite(t):
            raise ValueError(f"sample time must be finite, got {t!r}")
        if self._samples:
            dt = t - self._samples[0].t
            if dt == 0.0:
                raise ValueError(f"duplicate sample time {t!r}")
            d = self.direction
            if d is not None and math.copysign(1.0, dt) != d:
                raise ValueError(
                    f"sample time {t!r} runs against the established direction"
                )
        self._samples.insert(0, NodeSample(t, f))
        if len(self._samples) > self.capacity:
            self._samples.pop()

    def replace_newest(self, f) -> None:
        """Swap the newest sample's value, keeping its time.

        Used when a fresh oracle evaluation at the corrected state
        supersedes the corrector-stage evaluation recorded at the same time.
        """
        if not self._samples:
            raise UnderfilledHistoryError("history is empty")
        self._samples[0] = NodeSample(self._samples[0].t, self._coerce(f))

    def recent_times(self, k: int) -> np.ndarray:
        return np.array([s.t for s in self._samples[:k]], dtype=np.float64)

    def recent_values(self, k: int) -> np.ndarray:
        return np.stack([s.f for s in self._samples[:k]])

    def _coerce(self, f) -> np.ndarray:
        f = np.array(f, dtype=np.float64, copy=True).reshape(-1)
        if f.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"sample has dim {f.shape[0]}, history has dim {self.dim}"
            )
        return f


@dataclass(frozen=True)
class CoefficientSet:
    """Quadrature weights for one integration step.

    For the explicit rule there is one weight per history node; the
    implicit rule adds the future node first (``weights[0]``).
    """

    order: int
    weights: np.ndarray
    includes_future: bool
    node_times: tuple[float, ...]
    interval: tuple[float, float]


def _check_order(order: int) -> int:
    if not isinstance(order, (int, np.integer)) or isinstance(order, bool):
        raise UnsupportedOrderError(f"order must be an integer, got {order!r}")
    if not 1 <= order <= MAX_ORDER:
        raise UnsupportedOrderError(
            f"order {order} unsupported (must be in 1..{MAX_ORDER})"
        )
    return int(order)


def _check_nodes(node_times, interval) -> tuple[np.ndarray, float, float]:
    nodes = np.asarray(node_times, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(nodes)):
        raise ValueError(f"node times must be finite, got {nodes!r}")
    n = nodes.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            if nodes[i] == nodes[j]:
                raise DegenerateNodesError(
                    f"duplicate node time {nodes[i]!r}"
                )
    t_start, t_end = float(interval[0]), float(interval[1])
    if not (math.isfinite(t_start) and math.isfinite(t_end)):
        raise ValueError("interval endpoints must be finite")
    if t_end == t_start:
        raise ValueError("degenerate interval: t_end == t_start")
    return nodes, t_start, t_end


def ab_coefficients(order: int, node_times, interval) -> CoefficientSet:
    """Explicit (Adams-Bashforth) weights for arbitrary node spacing.

    ``node_times`` are the ``order`` history nodes, newest first. The
    returned weights satisfy sum_j w_j * f(node_times[j]) = integral of the
    Lagrange interpolant over ``interval``, exactly for any polynomial
    integrand of degree < order.
    """
    order = _check_order(order)
    nodes, t_start, t_end = _check_nodes(node_times, interval)
    if nodes.shape[0] != order:
        raise ValueError(
            f"expected {order} node times for order {order}, got {nodes.shape[0]}"
        )
    w = lagrange_weights(nodes, t_start, t_end)
    return CoefficientSet(
        order=order,
        weights=w,
        includes_future=False,
        node_times=tuple(float(t) for t in nodes),
        interval=(t_start, t_end),
    )


def am_coefficients(order: int, node_times, interval) -> CoefficientSet:
    """Implicit (Adams-Moulton) weights; ``node_times[0]`` is the future node.

    Order k normally interpolates k+1 nodes (future plus k history nodes).
    Order 1 additionally accepts the single-node form (the future node
    alone), which is the classical backward-Euler row; the two-node form is
    the trapezoidal rule and is what the step operators use.
    """
    order = _check_order(order)
    nodes, t_start, t_end = _check_nodes(node_times, interval)
    n = nodes.shape[0]
    if n != order + 1 and not (order == 1 and n == 1):
        raise ValueError(
            f"expected {order + 1} node times for order {order}, got {n}"
        )
    if nodes[0] != t_end:
        raise ValueError(
            f"node_times[0] ({nodes[0]!r}) must equal the interval end ({t_end!r})"
        )
    w = lagrange_weights(nodes, t_start, t_end)
    return CoefficientSet(
        order=order,
        weights=w,
        includes_future=True,
        node_times=tuple(float(t) for t in nodes),
        interval=(t_start, t_end),
    )


@lru_cache(maxsize=None)
def uniform_ab_weights(order: int) -> tuple[float, ...]:
    """Classical uniform-spacing explicit weights per unit step width."""
    order = _check_order(order)
    nodes = -np.arange(order, dtype=np.float64)
    return tuple(lagrange_weights(nodes, 0.0, 1.0))


@lru_cache(maxsize=None)
def uniform_am_weights(order: int, nodes_count: int | None = None) -> tuple[float, ...]:
    """Classical uniform-spacing implicit weights per unit step width."""
    order = _check_order(order)
    n = order + 1 if nodes_count is None else nodes_count
    if n == 1:
        nodes = np.array([1.0])
    else:
        nodes = np.concatenate(([1.0], -np.arange(n - 1, dtype=np.float64)))
    return tuple(lagrange_weights(nodes, 0.0, 1.0))


def _check_state(x, history: History) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != history.dim:
        raise DimensionMismatchError(
            f"state has dim {x.shape[0]}, history has dim {history.dim}"
        )
    return x


def _check_depth(history: History, order: int) -> None:
    if len(history) < order:
        raise UnderfilledHistoryError(
            f"history holds {len(history)} samples, order {order} needs {order}"
        )


def _check_target(history: History, t_next: float) -> None:
    dt = t_next - history.newest.t
    if dt == 0.0:
        raise ValueError(f"t_next {t_next!r} equals the most recent sample time")
    d = history.direction
    if d is not None and math.copysign(1.0, dt) != d:
        raise ValueError(
            f"t_next {t_next!r} is not beyond the history along its direction"
        )


def ab_step(x, history: History, t_next: float, order: int, *, t_current: float | None = None) -> np.ndarray:
    """Advance ``x`` over (t_current, t_next) by explicit extrapolation.

    Uses the ``order`` newest history nodes at their actual times; makes no
    oracle calls and does not mutate the history. ``t_current`` defaults to
    the newest node time; pass it explicitly when the state has already
    moved past the last recorded sample (skipped steps).
    """
    order = _check_order(order)
    _check_depth(history, order)
    x = _check_state(x, history)
    t_next = float(t_next)
    _check_target(history, t_next)
    if t_current is None:
        t_current = history.newest.t
    nodes = history.recent_times(order)
    w = lagrange_weights(nodes, float(t_current), t_next)
    return weighted_step(x, history.recent_values(order), w)


def am_step(x, history: History, f_future, t_next: float, order: int, *, t_current: float | None = None) -> np.ndarray:
    """Advance ``x`` over (t_current, t_next) by the implicit rule.

    ``f_future`` is the field value at t_next, supplied by the caller; no
    oracle calls happen here. Order k interpolates the future node plus the
    k newest history nodes.
    """
    order = _check_order(order)
    _check_depth(history, order)
    x = _check_state(x, history)
    f_future = np.asarray(f_future, dtype=np.float64).reshape(-1)
    if f_future.shape[0] != history.dim:
        raise DimensionMismatchError(
            f"f_future has dim {f_future.shape[0]}, history has dim {history.dim}"
        )
    t_next = float(t_next)
    _check_target(history, t_next)
    if t_current is None:
        t_current = history.newest.t
    nodes = np.concatenate(([t_next], history.recent_times(order)))
    w = lagrange_weights(nodes, float(t_current), t_next)
    values = np.concatenate((f_future[None, :], history.recent_values(order)))
    return weighted_step(x, values, w)


def abm_step(
    x,
    history: History,
    t_next: float,
    oracle: Callable[[np.ndarray, float], Sequence[float]],
    order: int,
    *,
    t_current: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Predict-evaluate-correct step: exactly one oracle call.

    Predicts with the explicit rule, evaluates the oracle at the predicted
    state, corrects with the implicit rule using that evaluation. Returns
    the corrected state and the evaluation; the caller is responsible for
    appending the evaluation to the history.
    """
    predicted = ab_step(x, history, t_next, order, t_current=t_current)
    f_next = np.asarray(oracle(predicted, float(t_next)), dtype=np.float64).reshape(-1)
    corrected = am_step(x, history, f_next, t_next, order, t_current=t_current)
    return corrected, f_next
