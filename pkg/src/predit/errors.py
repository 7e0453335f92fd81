"""Exception types shared across the package."""

from __future__ import annotations


class ConfigurationError(ValueError):
    """A run was configured with unusable inputs (bad schedule, unknown field, ...)."""


class OracleFailure(RuntimeError):
    """The vector-field oracle raised during a run.

    Carries the schedule step index at which the evaluation happened so
    callers (and foreign-language hosts driving the CLI) can locate the
    failing call.
    """

    def __init__(self, step: int, t: float, cause: BaseException | str):
        self.step = step
        self.t = t
        self.cause = cause
        super().__init__(f"oracle failure at step {step} (t={t!r}): {cause}")


class DegenerateStudyError(ValueError):
    """A convergence study measured zero error; pick a field with curvature."""


class InvalidStudyError(RuntimeError):
    """Reference hygiene failed: the fallback reference is not accurate enough
    relative to the errors being measured, so the report would be meaningless."""


class TrajectoryFormatError(ValueError):
    """A recorded-trajectory file violates the declared header or row shape."""


class TrajectoryRangeError(ValueError):
    """Replay was asked for a time outside the recorded range (no extrapolation)."""
