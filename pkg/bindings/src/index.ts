export {
  BoundOracle,
  boundSample,
  policyDefaults,
  type BoundSampleOptions,
  type BoundSampleResult,
  type OracleFn,
  type PolicyParams,
  type RunStats,
  type StepRecord,
} from "./boundSample.js";
export {
  readTrajectory,
  writeTrajectory,
  type Trajectory,
} from "./trajectory.js";
export {
  OracleFailureError,
  ParamValidationError,
  SamplerProcessError,
  TrajectoryFormatError,
} from "./errors.js";
