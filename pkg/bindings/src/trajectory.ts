/**
 * Read/write helpers for the recorded-trajectory text format:
 * header "predit-traj v1 dim=<d> n=<N>", then N whitespace-separated rows
 * of "t v1 .. vd" decimal floats, ASCII.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { TrajectoryFormatError } from "./errors.js";

const HEADER_PREFIX = "predit-traj v1";

export interface Trajectory {
  times: number[];
  values: number[][];
  metadata?: string;
}

function checkShape(traj: Trajectory): number {
  if (traj.times.length === 0) {
    throw new TrajectoryFormatError("trajectory is empty");
  }
  if (traj.times.length !== traj.values.length) {
    throw new TrajectoryFormatError(
      `${traj.times.length} times vs ${traj.values.length} value rows`,
    );
  }
  const dim = traj.values[0]!.length;
  if (dim === 0 || !traj.values.every((row) => row.length === dim)) {
    throw new TrajectoryFormatError("value rows must share one positive dimension");
  }
  for (let i = 1; i < traj.times.length; i++) {
    const a = traj.times[i]! - traj.times[i - 1]!;
    const b = traj.times[1]! - traj.times[0]!;
    if (a === 0 || Math.sign(a) !== Math.sign(b)) {
      throw new TrajectoryFormatError("times must be strictly monotone");
    }
  }
  return dim;
}

export function writeTrajectory(path: string, traj: Trajectory): void {
  const dim = checkShape(traj);
  const lines = [`${HEADER_PREFIX} dim=${dim} n=${traj.times.length}`];
  for (let i = 0; i < traj.times.length; i++) {
    lines.push([traj.times[i], ...traj.values[i]!].map(String).join(" "));
  }
  writeFileSync(path, lines.join("\n") + "\n", { encoding: "ascii" });
}

export function readTrajectory(path: string): Trajectory {
  const text = readFileSync(path, { encoding: "ascii" });
  const lines = text.split("\n");
  const header = (lines[0] ?? "").trim();
  const match = /^predit-traj v1 dim=(\d+) n=(\d+)$/.exec(header);
  if (!match) {
    throw new TrajectoryFormatError(`bad trajectory header: ${JSON.stringify(header)}`);
  }
  const dim = Number(match[1]);
  const n = Number(match[2]);
  const times: number[] = [];
  const values: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i]!.trim();
    if (!line) continue;
    const cols = line.split(/\s+/);
    if (cols.length !== dim + 1) {
      throw new TrajectoryFormatError(
        `line ${i + 1}: expected ${dim + 1} columns, got ${cols.length}`,
      );
    }
    const nums = cols.map(Number);
    if (!nums.every(Number.isFinite)) {
      throw new TrajectoryFormatError(`line ${i + 1}: non-numeric column`);
    }
    times.push(nums[0]!);
    values.push(nums.slice(1));
  }
  if (times.length !== n) {
    throw new TrajectoryFormatError(`header declares n=${n} rows, file has ${times.length}`);
  }
  return { times, values };
}
