import { DIGITS, Digit, HandModel, JointName, forwardKinematics, jointIndex } from "./model.js";
import { NUM_JOINTS, PosePayload, Vec3, WristCmdPayload } from "./schema.js";

export interface SliderValues {
  curl: Record<Digit, number>; // [0, 1]
  spread: Record<Digit, number>; // [0, 1]; thumb and middle have no abduction joint
  wrist: WristCmdPayload; // degrees
}

export function zeroSliders(): SliderValues {
  const zeros = () => Object.fromEntries(DIGITS.map((d) => [d, 0])) as Record<Digit, number>;
  return { curl: zeros(), spread: zeros(), wrist: { alpha: 0, beta: 0 } };
}

const unit = (x: number) => (Number.isFinite(x) ? Math.min(1, Math.max(0, x)) : 0);

export function clampSliders(model: HandModel, s: SliderValues): SliderValues {
  const fe = model.limits[jointIndex("wrist_fe")], rud = model.limits[jointIndex("wrist_rud")];
  const range = (x: number, [lo, hi]: [number, number]) => (Number.isFinite(x) ? Math.min(hi, Math.max(lo, x)) : 0);
  const out = zeroSliders();
  for (const d of DIGITS) {
    out.curl[d] = unit(s.curl[d]);
    out.spread[d] = unit(s.spread[d]);
  }
  out.wrist = { alpha: range(s.wrist.alpha, fe), beta: range(s.wrist.beta, rud) };
  return out;
}

const FLEXION: Record<Digit, JointName[]> = {
  thumb: ["thumb_cmc", "thumb_mcp", "thumb_ip"],
  index: ["index_mcp", "index_pip", "index_dip"],
  middle: ["middle_mcp", "middle_pip", "middle_dip"],
  ring: ["ring_mcp", "ring_pip", "ring_dip"],
  pinky: ["pinky_mcp", "pinky_pip", "pinky_dip"],
};

const ABDUCTION: Partial<Record<Digit, JointName>> = {
  index: "index_abduction",
  ring: "ring_abduction",
  pinky: "pinky_abduction",
};

/** Hand joint angles the sliders describe; wrist left at zero. */
export function slidersToAngles(model: HandModel, sliders: SliderValues): number[] {
  const s = clampSliders(model, sliders);
  const angles = new Array<number>(NUM_JOINTS).fill(0);
  const lerp = (name: JointName, u: number) => {
    const [lo, hi] = model.limits[jointIndex(name)];
    angles[jointIndex(name)] = lo + u * (hi - lo);
  };
  for (const d of DIGITS) {
    for (const j of FLEXION[d]) lerp(j, s.curl[d]);
    const abd = ABDUCTION[d];
    if (abd) lerp(abd, s.spread[d]);
  }
  return angles;
}

/** Synthetic 21-keypoint hand in meters. Curl 0 and spread 0 give the flat extended hand. */
export function slidersToPose(model: HandModel, sliders: SliderValues): PosePayload {
  const mm = forwardKinematics(model, slidersToAngles(model, sliders));
  return { keypoints: mm.map((p) => p.map((x) => x / 1000) as Vec3) };
}
