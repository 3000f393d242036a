import { readFileSync } from "node:fs";

import { HandModel, JOINT_NAMES } from "./model.js";
import { ConfigUpdatePayload, NUM_MOTORS, SchemaError } from "./schema.js";

export interface CalibrationRecord {
  p_min: number;
  p_max: number;
  theta_min: number;
  theta_max: number;
  c: number;
}

export type CalibrationSet = (CalibrationRecord | undefined)[];

export function calibrationFromJson(j: any): CalibrationSet {
  if (j?.schema !== "handctl.calibration") throw new SchemaError("not a calibration file");
  const out: CalibrationSet = new Array(NUM_MOTORS).fill(undefined);
  for (const r of j.motors ?? []) {
    if (!Number.isInteger(r.motor) || r.motor < 0 || r.motor >= NUM_MOTORS) {
      throw new SchemaError("calibration motor index out of range");
    }
    out[r.motor] = { p_min: r.p_min, p_max: r.p_max, theta_min: r.theta_min, theta_max: r.theta_max, c: r.c ?? 1 };
  }
  return out;
}

export function loadCalibration(path: string): CalibrationSet {
  return calibrationFromJson(JSON.parse(readFileSync(path, "utf8")));
}

/** Exact at t = 0 and t = 1 and monotone in t. */
export function lerp(a: number, b: number, t: number): number {
  if ((a <= 0 && b >= 0) || (a >= 0 && b <= 0)) return t * b + (1 - t) * a;
  if (t === 1) return b;
  const x = a + t * (b - a);
  return t > 1 === b > a ? Math.max(b, x) : Math.min(b, x);
}

export function jointToMotor(theta: number, cal: CalibrationRecord): number {
  const f = (theta - cal.theta_min) / (cal.theta_max - cal.theta_min);
  const p = lerp(cal.p_min, cal.p_max, cal.c * f);
  return Math.min(Math.max(p, Math.min(cal.p_min, cal.p_max)), Math.max(cal.p_min, cal.p_max));
}

/** Joint index whose angle drives `motor`; DIP followers never drive. */
export function drivingJoint(model: HandModel, motor: number): number {
  for (let j = 0; j < JOINT_NAMES.length; ++j) {
    if (model.actuation[j] === motor && !JOINT_NAMES[j].endsWith("_dip")) return j;
  }
  throw new SchemaError(`no joint drives motor ${motor}`);
}

export interface OverlayCurve {
  motor: number;
  theta: number[];
  before: number[];
  after: number[];
  current: { theta: number; before: number; after: number };
}

export class WhatIfError extends Error {
  override name = "WhatIfError";
}

/**
 * Predicted motor commands under the current and proposed scaling factors, sampled
 * over the calibrated range plus the current pose. Rejects c <= 0.
 */
export function whatIfScaling(
  model: HandModel,
  cals: CalibrationSet,
  angles: number[],
  cNew: Record<number, number>,
  samples = 25,
): { overlay: OverlayCurve[]; update: ConfigUpdatePayload } {
  const overlay: OverlayCurve[] = [];
  for (const [key, c] of Object.entries(cNew)) {
    const motor = Number(key);
    if (!(c > 0) || !Number.isFinite(c)) throw new WhatIfError(`scaling factor for motor ${motor} must be > 0`);
    const cal = cals[motor];
    if (!cal) throw new WhatIfError(`motor ${motor} is not calibrated`);
    const next = { ...cal, c };
    const theta: number[] = [], before: number[] = [], after: number[] = [];
    for (let i = 0; i < samples; ++i) {
      const th = lerp(cal.theta_min, cal.theta_max, i / (samples - 1));
      theta.push(th);
      before.push(jointToMotor(th, cal));
      after.push(jointToMotor(th, next));
    }
    const th = angles[drivingJoint(model, motor)];
    overlay.push({
      motor,
      theta,
      before,
      after,
      current: { theta: th, before: jointToMotor(th, cal), after: jointToMotor(th, next) },
    });
  }
  return { overlay, update: { c: { ...cNew } } };
}
