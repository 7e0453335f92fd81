/**
 * Delegate a sampling run to the predit CLI, serving oracle evaluations
 * from a host-language callable over the line-oriented stdio protocol.
 *
 * Wire format (one line each way per evaluation):
 *   sampler -> host: "EVAL <t> <x1> .. <xd>"
 *   host -> sampler: "<f1> .. <fd>"            (or "ERR <message>")
 * and a final "RESULT <json>" line carrying the state and statistics.
 */

import { spawn } from "node:child_process";
import { createInterface } from "node:readline";

import {
  OracleFailureError,
  ParamValidationError,
  SamplerProcessError,
} from "./errors.js";

/** Host-side vector field: may be synchronous or promise-returning. */
export type OracleFn = (
  x: readonly number[],
  t: number,
) => readonly number[] | Promise<readonly number[]>;

/** Mirrors the sampler's policy knobs; all fields optional, defaults below. */
export interface PolicyParams {
  order?: number;
  tau?: number;
  ratio?: number;
  sensitivity?: number;
  epsilon?: number;
  j_max?: number;
}

export const policyDefaults: Required<PolicyParams> = {
  order: 2,
  tau: 2.0,
  ratio: 0.3,
  sensitivity: 1,
  epsilon: 1e-8,
  j_max: 8,
};

const PARAM_FLAGS: Record<keyof Required<PolicyParams>, string> = {
  order: "--order",
  tau: "--tau",
  ratio: "--ratio",
  sensitivity: "--p",
  epsilon: "--eps",
  j_max: "--jmax",
};

/** One schedule step of the run's decision trace. */
export interface StepRecord {
  index: number;
  t: number;
  computed: boolean;
  branch: string | null;
  delta: number | null;
  skip: number;
  order_used: number | null;
  warmup: boolean;
}

/** Run statistics, mirroring the sampler's own accounting. */
export interface RunStats {
  oracle_calls: number;
  steps_total: number;
  skip_histogram: Record<string, number>;
  decisions: StepRecord[];
}

export interface BoundSampleResult {
  xFinal: number[];
  stats: RunStats;
}

export interface BoundSampleOptions {
  /** Interpreter used to launch the sampler (default: $PREDIT_PYTHON or python3). */
  python?: string;
}

/**
 * Counting wrapper around a host callable with a fixed dimension.
 * The dimension is declared once and enforced on every exchange.
 */
export class BoundOracle {
  readonly dim: number;
  calls = 0;
  private readonly fn: OracleFn;

  constructor(fn: OracleFn, dim: number) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new ParamValidationError(`dim must be a positive integer, got ${dim}`);
    }
    this.fn = fn;
    this.dim = dim;
  }

  async evaluate(x: number[], t: number): Promise<number[]> {
    if (x.length !== this.dim) {
      throw new ParamValidationError(
        `state has dim ${x.length}, oracle declared ${this.dim}`,
      );
    }
    const out = await this.fn(x, t);
    const values = Array.from(out, Number);
    if (values.length !== this.dim) {
      throw new Error(
        `oracle returned ${values.length} values, expected ${this.dim}`,
      );
    }
    if (!values.every(Number.isFinite)) {
      throw new Error("oracle returned non-finite values");
    }
    this.calls += 1;
    return values;
  }
}

function validateParams(params: PolicyParams): string[] {
  const argv: string[] = [];
  for (const [key, value] of Object.entries(params)) {
    if (!(key in PARAM_FLAGS)) {
      throw new ParamValidationError(
        `unknown policy key '${key}' (allowed: ${Object.keys(PARAM_FLAGS).join(", ")})`,
      );
    }
    if (typeof value !== "number" || !Number.isFinite(value)) {
      throw new ParamValidationError(`policy key '${key}' must be a finite number`);
    }
    argv.push(PARAM_FLAGS[key as keyof PolicyParams]!, String(value));
  }
  return argv;
}

function validateTimes(times: readonly number[]): void {
  if (times.length < 2) {
    throw new ParamValidationError("schedule needs at least 2 times");
  }
  if (!times.every(Number.isFinite)) {
    throw new ParamValidationError("schedule times must be finite");
  }
}

const FAILURE_RE = /oracle failure at step (\d+)/;

/**
 * Run the adaptive sampler over an explicit schedule with a host oracle.
 *
 * Evaluations are served strictly one at a time (the callable is never
 * invoked concurrently with itself); arrays cross the process boundary by
 * value. Exceptions thrown by the callable surface as OracleFailureError
 * carrying the schedule step index reported by the sampler.
 */
export async function boundSample(
  xInit: readonly number[],
  times: readonly number[],
  oracle: BoundOracle | OracleFn,
  params: PolicyParams = {},
  options: BoundSampleOptions = {},
): Promise<BoundSampleResult> {
  const bound =
    oracle instanceof BoundOracle ? oracle : new BoundOracle(oracle, xInit.length);
  if (bound.dim !== xInit.length) {
    throw new ParamValidationError(
      `x_init has dim ${xInit.length}, oracle declared ${bound.dim}`,
    );
  }
  const paramArgv = validateParams(params);
  validateTimes(times);

  const python = options.python ?? process.env.PREDIT_PYTHON ?? "python3";
  const argv = [
    "-m",
    "predit",
    "sample",
    "--field",
    "stdio",
    "--dim",
    String(bound.dim),
    "--times",
    times.map(String).join(","),
    "--x0",
    xInit.map(String).join(","),
    ...paramArgv,
  ];

  const child = spawn(python, argv, { stdio: ["pipe", "pipe", "pipe"] });
  let stderr = "";
  child.stderr.setEncoding("utf8");
  child.stderr.on("data", (chunk: string) => {
    stderr += chunk;
  });

  let hostError: unknown;
  let result: BoundSampleResult | undefined;

  const reader = createInterface({ input: child.stdout });
  for await (const line of reader) {
    if (line.startsWith("EVAL ")) {
      const cols = line.slice(5).trim().split(/\s+/);
      const t = Number(cols[0]);
      const x = cols.slice(1).map(Number);
      let reply: string;
      try {
        const values = await bound.evaluate(x, t);
        reply = values.map(String).join(" ");
      } catch (err) {
        hostError = err;
        const message = err instanceof Error ? err.message : String(err);
        reply = `ERR ${message.replace(/\s+/g, " ")}`;
      }
      child.stdin.write(reply + "\n");
    } else if (line.startsWith("RESULT ")) {
      const payload = JSON.parse(line.slice("RESULT ".length));
      result = { xFinal: payload.x_final, stats: payload.stats };
    }
  }

  const exitCode: number | null = await new Promise((resolve) => {
    child.on("close", (code) => resolve(code));
  });
  child.stdin.end();

  if (exitCode === 0 && result !== undefined) {
    return result;
  }
  const failure = FAILURE_RE.exec(stderr);
  if (failure) {
    const detail =
      hostError instanceof Error ? hostError.message : stderr.trim();
    throw new OracleFailureError(Number(failure[1]), detail, hostError);
  }
  throw new SamplerProcessError(exitCode, stderr);
}
