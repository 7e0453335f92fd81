"""Linear-multistep feature forecasting over expensive vector-field oracles.

Explicit prediction from cached history, implicit correction where the
trajectory bends, and change-rate-driven skip control, with measurement
machinery (convergence order, drift, call allocation) and a benchmark CLI.
"""

from predit._kernels import BACKEND as kernel_backend
from predit.dynamics import Branch, PolicyParams, StepDecision, change_rate, decide, skip_interval
from predit.errors import (
    ConfigurationError,
    DegenerateStudyError,
    InvalidStudyError,
    OracleFailure,
    TrajectoryFormatError,
    TrajectoryRangeError,
)
from predit.fields import (
    FieldSpec,
    OracleHandle,
    RecordedTrajectory,
    make_field,
    read_trajectory,
    replay_oracle,
    write_trajectory,
)
from predit.multistep import (
    CoefficientSet,
    DegenerateNodesError,
    DimensionMismatchError,
    History,
    MultistepError,
    NodeSample,
    UnderfilledHistoryError,
    UnsupportedOrderError,
    ab_coefficients,
    ab_step,
    abm_step,
    am_coefficients,
    am_step,
)
from predit.sampler import (
    RunStats,
    Schedule,
    StepRecord,
    ab_fixed_sample,
    abm_fixed_sample,
    euler_sample,
    reuse_sample,
    sample,
)
from predit.errorlab import (
    ConvergenceReport,
    DriftReport,
    calibrate_interval,
    calibrate_jmax,
    call_allocation_profile,
    convergence_study,
    drift_study,
    reference_solution,
)

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "Branch",
    "PolicyParams",
    "StepDecision",
    "change_rate",
    "decide",
    "skip_interval",
    "ConfigurationError",
    "DegenerateStudyError",
    "InvalidStudyError",
    "OracleFailure",
    "TrajectoryFormatError",
    "TrajectoryRangeError",
    "FieldSpec",
    "OracleHandle",
    "RecordedTrajectory",
    "make_field",
    "read_trajectory",
    "replay_oracle",
    "write_trajectory",
    "CoefficientSet",
    "DegenerateNodesError",
    "DimensionMismatchError",
    "History",
    "MultistepError",
    "NodeSample",
    "UnderfilledHistoryError",
    "UnsupportedOrderError",
    "ab_coefficients",
    "ab_step",
    "abm_step",
    "am_coefficients",
    "am_step",
    "RunStats",
    "Schedule",
    "StepRecord",
    "ab_fixed_sample",
    "abm_fixed_sample",
    "euler_sample",
    "reuse_sample",
    "sample",
    "ConvergenceReport",
    "DriftReport",
    "calibrate_interval",
    "calibrate_jmax",
    "call_allocation_profile",
    "convergence_study",
    "drift_study",
    "reference_solution",
]
