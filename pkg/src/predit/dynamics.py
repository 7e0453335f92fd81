"""Feature change-rate monitoring and the skip/correct decision policy.

The relative L1 change rate between consecutive model outputs drives two
choices per computed step: whether the corrector runs, and how many
subsequent steps may be advanced by pure extrapolation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from predit.multistep import MAX_ORDER, DimensionMismatchError


class Branch(enum.Enum):
    """Outcome of the per-step decision."""

    FULL_ABM = "full_abm"          # correct, no skipping
    ABM_WITH_SKIP = "abm_with_skip"  # correct, then skip a few steps
    AB_WITH_SKIP = "ab_with_skip"    # predict only, skip aggressively


@dataclass(frozen=True)
class PolicyParams:
    """All policy knobs: order, threshold, correction ratio, sensitivity,
    stability constant, and the skip-length cap."""

    order: int = 2
    tau: float = 2.0
    ratio: float = 0.3
    sensitivity: int = 1
    epsilon: float = 1e-8
    j_max: int = 8

    def __post_init__(self):
        if not 1 <= self.order <= MAX_ORDER:
            raise ValueError(f"order must be in 1..{MAX_ORDER}, got {self.order}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0 < self.ratio < 1:
            raise ValueError(f"ratio must be in (0, 1), got {self.ratio}")
        if self.sensitivity < 0 or int(self.sensitivity) != self.sensitivity:
            raise ValueError(
                f"sensitivity must be a non-negative integer, got {self.sensitivity}"
            )
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.j_max < 1:
            raise ValueError(f"j_max must be at least 1, got {self.j_max}")


@dataclass(frozen=True)
class StepDecision:
    branch: Branch
    skip: int

    def __post_init__(self):
        if self.branch is Branch.FULL_ABM and self.skip != 0:
            raise ValueError("full compute implies zero skip")
        if self.skip < 0:
            raise ValueError(f"skip must be non-negative, got {self.skip}")


def change_rate(f_n, f_prev, epsilon: float) -> float:
    """Relative L1 change rate between consecutive outputs.

    ``|f_n - f_prev|_1 / (|f_n|_1 + epsilon)``; always finite and
    non-negative. ``epsilon`` may be zero only for scale-invariance checks;
    runs use a small positive value.
    """
    f_n = np.asarray(f_n, dtype=np.float64).reshape(-1)
    f_prev = np.asarray(f_prev, dtype=np.float64).reshape(-1)
    if f_n.shape != f_prev.shape:
        raise DimensionMismatchError(
            f"change_rate dims disagree: {f_n.shape[0]} vs {f_prev.shape[0]}"
        )
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    num = float(np.sum(np.abs(f_n - f_prev)))
    den = float(np.sum(np.abs(f_n))) + epsilon
    return num / den


def skip_interval(delta: float, params: PolicyParams) -> int:
    """Skip length for a given change rate: floor(tau / (delta + eps)^(1/(p+1))),
    capped at j_max. Monotone non-increasing in delta."""
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    root = 1.0 / (params.sensitivity + 1)
    raw = params.tau / (delta + params.epsilon) ** root
    if raw >= params.j_max:
        return params.j_max
    return int(math.floor(raw))


def decide(delta: float, params: PolicyParams) -> StepDecision:
    """Three-way branch on the change rate.

    delta >= tau: full compute with correction. tau*ratio <= delta < tau:
    correct, then skip. delta < tau*ratio: predict only, skip. Both
    boundaries belong to the upper branch.
    """
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    if delta >= params.tau:
        return StepDecision(Branch.FULL_ABM, 0)
    if delta >= params.tau * params.ratio:
        return StepDecision(Branch.ABM_WITH_SKIP, skip_interval(delta, params))
    return StepDecision(Branch.AB_WITH_SKIP, skip_interval(delta, params))
