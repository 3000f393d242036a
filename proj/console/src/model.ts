import { readFileSync } from "node:fs";

import { NUM_JOINTS, NUM_KEYPOINTS, SchemaError, Vec3 } from "./schema.js";

/** Same order as the service's joint index. */
export const JOINT_NAMES = [
  "thumb_cmc", "thumb_mcp", "thumb_ip",
  "index_abduction", "index_mcp", "index_pip", "index_dip",
  "middle_mcp", "middle_pip", "middle_dip",
  "ring_abduction", "ring_mcp", "ring_pip", "ring_dip",
  "pinky_abduction", "pinky_mcp", "pinky_pip", "pinky_dip",
  "wrist_fe", "wrist_rud",
] as const;

export type JointName = (typeof JOINT_NAMES)[number];

export const DIGITS = ["thumb", "index", "middle", "ring", "pinky"] as const;
export type Digit = (typeof DIGITS)[number];

export function jointIndex(name: JointName): number {
  return JOINT_NAMES.indexOf(name);
}

export interface DigitGeometry {
  base_mm: Vec3;
  yaw_deg: number;
  pitch_deg: number;
  links_mm: [number, number, number];
  abduction_sign: number;
}

export interface HandModel {
  digits: Record<Digit, DigitGeometry>;
  limits: [number, number][]; // per joint index, degrees
  actuation: number[]; // motor per joint index
  wrist_pivot_mm: Vec3;
  thumb_cmc_axis: Vec3;
}

export function handModelFromJson(j: any): HandModel {
  if (j?.schema !== "handctl.hand_model") throw new SchemaError("not a hand model file");
  const digits = {} as Record<Digit, DigitGeometry>;
  for (const d of DIGITS) {
    const g = j.digits?.[d];
    if (!g) throw new SchemaError(`missing digit '${d}'`);
    digits[d] = {
      base_mm: g.base_mm,
      yaw_deg: g.yaw_deg,
      pitch_deg: g.pitch_deg,
      links_mm: g.links_mm,
      abduction_sign: g.abduction_sign,
    };
  }
  const limits = JOINT_NAMES.map((n) => {
    const l = j.limits_deg?.[n];
    if (!Array.isArray(l) || l.length !== 2) throw new SchemaError(`missing limits for '${n}'`);
    return [l[0], l[1]] as [number, number];
  });
  const actuation = JOINT_NAMES.map((n) => {
    const m = j.actuation_map?.[n];
    if (typeof m !== "number") throw new SchemaError(`missing motor for '${n}'`);
    return m;
  });
  return { digits, limits, actuation, wrist_pivot_mm: j.wrist_pivot_mm, thumb_cmc_axis: j.thumb_cmc_axis };
}

export function loadHandModel(path: string): HandModel {
  return handModelFromJson(JSON.parse(readFileSync(path, "utf8")));
}

type Mat3 = number[]; // row-major 3x3

const rad = (deg: number) => (deg * Math.PI) / 180;

function mul(a: Mat3, b: Mat3): Mat3 {
  const out = new Array<number>(9).fill(0);
  for (let r = 0; r < 3; ++r)
    for (let c = 0; c < 3; ++c) for (let k = 0; k < 3; ++k) out[3 * r + c] += a[3 * r + k] * b[3 * k + c];
  return out;
}

function apply(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
    m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
    m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
  ];
}

export function rotY(deg: number): Mat3 {
  const c = Math.cos(rad(deg)), s = Math.sin(rad(deg));
  return [c, 0, s, 0, 1, 0, -s, 0, c];
}

export function rotZ(deg: number): Mat3 {
  const c = Math.cos(rad(deg)), s = Math.sin(rad(deg));
  return [c, -s, 0, s, c, 0, 0, 0, 1];
}

export function axisAngle(axis: Vec3, deg: number): Mat3 {
  const n = Math.hypot(...axis);
  const [x, y, z] = axis.map((a) => a / n);
  const c = Math.cos(rad(deg)), s = Math.sin(rad(deg)), t = 1 - c;
  return [
    t * x * x + c, t * x * y - s * z, t * x * z + s * y,
    t * x * y + s * z, t * y * y + c, t * y * z - s * x,
    t * x * z - s * y, t * y * z + s * x, t * z * z + c,
  ];
}

/** 21 keypoints in millimetres: wrist, then base/joint/joint/tip per digit, thumb first. */
export function forwardKinematics(model: HandModel, angles: number[]): Vec3[] {
  if (angles.length !== NUM_JOINTS) throw new SchemaError(`expected ${NUM_JOINTS} joint angles`);
  const a = (n: JointName) => angles[jointIndex(n)];
  const wrist = mul(rotY(a("wrist_fe")), rotZ(a("wrist_rud")));
  const pivot = model.wrist_pivot_mm;
  const place = (p: Vec3): Vec3 => {
    const r = apply(wrist, [p[0] - pivot[0], p[1] - pivot[1], p[2] - pivot[2]]);
    return [r[0] + pivot[0], r[1] + pivot[1], r[2] + pivot[2]];
  };

  const kp: Vec3[] = [place([0, 0, 0])];
  for (const d of DIGITS) {
    const g = model.digits[d];
    const base = mul(rotZ(g.yaw_deg), rotY(g.pitch_deg));
    const frames: Mat3[] = [];
    if (d === "thumb") {
      frames.push(mul(base, axisAngle(model.thumb_cmc_axis, a("thumb_cmc"))));
      frames.push(mul(frames[0], rotY(a("thumb_mcp"))));
      frames.push(mul(frames[1], rotY(a("thumb_ip"))));
    } else {
      const abd = d === "middle" ? 0 : a(`${d}_abduction` as JointName);
      frames.push(mul(mul(base, rotZ(g.abduction_sign * abd)), rotY(a(`${d}_mcp` as JointName))));
      frames.push(mul(frames[0], rotY(a(`${d}_pip` as JointName))));
      frames.push(mul(frames[1], rotY(a(`${d}_dip` as JointName))));
    }
    let p: Vec3 = [...g.base_mm];
    kp.push(place(p));
    for (let k = 0; k < 3; ++k) {
      const dir = apply(frames[k], [1, 0, 0]);
      p = [p[0] + g.links_mm[k] * dir[0], p[1] + g.links_mm[k] * dir[1], p[2] + g.links_mm[k] * dir[2]];
      kp.push(place(p));
    }
  }
  if (kp.length !== NUM_KEYPOINTS) throw new Error("keypoint count mismatch");
  return kp;
}
