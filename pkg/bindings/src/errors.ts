/** Binding-level failures, raised before or during a delegated run. */

/** A parameter mapping contained keys or values the policy does not accept. */
export class ParamValidationError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ParamValidationError";
  }
}

/**
 * The host oracle (or the wire to it) failed during a run. Carries the
 * schedule step index at which the evaluation happened, and the original
 * host-side error when the callable itself threw.
 */
export class OracleFailureError extends Error {
  readonly step: number;
  readonly cause?: unknown;

  constructor(step: number, message: string, cause?: unknown) {
    super(`oracle failure at step ${step}: ${message}`);
    this.name = "OracleFailureError";
    this.step = step;
    this.cause = cause;
  }
}

/** The delegated process died in a way that is not an oracle failure. */
export class SamplerProcessError extends Error {
  readonly exitCode: number | null;
  readonly stderr: string;

  constructor(exitCode: number | null, stderr: string) {
    super(`sampler process failed (exit ${exitCode}): ${stderr.trim()}`);
    this.name = "SamplerProcessError";
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}

/** A trajectory file violated the declared header or row shape. */
export class TrajectoryFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "TrajectoryFormatError";
  }
}
