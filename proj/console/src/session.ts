import { HandModel, forwardKinematics } from "./model.js";
import {
  ConfigUpdatePayload,
  Message,
  NUM_MOTORS,
  SchemaError,
  StatePayload,
  decodeMessage,
} from "./schema.js";
import { SliderValues, clampSliders, slidersToPose, zeroSliders } from "./sliders.js";
import { CalibrationSet } from "./whatif.js";

export type InputMode = "sliders" | "keypoint_file";

export const MOTOR_GROUPS = ["fingers", "thumb", "wrist"] as const;
export type MotorGroup = (typeof MOTOR_GROUPS)[number];

export function motorGroup(motor: number): MotorGroup {
  if (motor <= 2) return "thumb";
  if (motor >= 14) return "wrist";
  return "fingers";
}

export interface RenderFrame {
  seq: number;
  skeleton: { x: number; y: number; depth: number }[]; // orthographic view of the palm plane, mm
  bones: [number, number][];
  motors: { tick: number; lo?: number; hi?: number }[];
  temps: Record<MotorGroup, number[]>; // sparkline history, degC
  residual: number;
  recording: boolean;
}

export const BONES: [number, number][] = (() => {
  const out: [number, number][] = [];
  for (let d = 0; d < 5; ++d) {
    const base = 1 + 4 * d;
    out.push([0, base], [base, base + 1], [base + 1, base + 2], [base + 2, base + 3]);
  }
  return out;
})();

export interface SessionOptions {
  staleAfterMs?: number;
  errorHoldMs?: number;
  sparklineLength?: number;
  now?: () => number; // milliseconds
  calibrations?: CalibrationSet;
}

/**
 * Operator-side state. Every displayed value comes from the latest State message;
 * what-if overlays are computed separately and labelled as predictions.
 */
export class ConsoleSession {
  inputMode: InputMode = "sliders";
  private sliders_: SliderValues = zeroSliders();
  private latest?: { seq: number; state: StatePayload };
  private lastMessageAt?: number;
  private errorBanner?: { text: string; at: number };
  private outSeq = 0;
  private readonly startedAt: number;
  private readonly temps: Record<MotorGroup, number[]> = { fingers: [], thumb: [], wrist: [] };
  private readonly staleAfterMs: number;
  private readonly errorHoldMs: number;
  private readonly sparklineLength: number;
  private readonly now: () => number;
  private readonly cals?: CalibrationSet;

  constructor(readonly model: HandModel, opts: SessionOptions = {}) {
    this.staleAfterMs = opts.staleAfterMs ?? 1000;
    this.errorHoldMs = opts.errorHoldMs ?? 3000;
    this.sparklineLength = opts.sparklineLength ?? 300;
    this.now = opts.now ?? (() => Date.now());
    this.cals = opts.calibrations;
    this.startedAt = this.now();
  }

  get sliders(): SliderValues {
    return this.sliders_;
  }

  setSliders(s: SliderValues): void {
    this.sliders_ = clampSliders(this.model, s);
  }

  get latestState(): StatePayload | undefined {
    return this.latest?.state;
  }

  /** Reflects the service-acknowledged flag only. */
  get recording(): boolean {
    return this.latest?.state.recording ?? false;
  }

  /** Visible banner text: stale connection first, then any error from the last few seconds. */
  banner(): string | undefined {
    const t = this.now();
    if (this.lastMessageAt === undefined) {
      if (t - this.startedAt > this.staleAfterMs) return "no messages from service";
    } else if (t - this.lastMessageAt > this.staleAfterMs) {
      return `connection stale: no message for ${((t - this.lastMessageAt) / 1000).toFixed(1)} s`;
    }
    if (this.errorBanner && t - this.errorBanner.at <= this.errorHoldMs) return this.errorBanner.text;
    return undefined;
  }

  /** Applies one inbound JSON text. Malformed input only raises the banner. */
  receive(text: string): Message | undefined {
    this.lastMessageAt = this.now();
    let msg: Message;
    try {
      msg = decodeMessage(text);
    } catch (e) {
      if (!(e instanceof SchemaError)) throw e;
      this.errorBanner = { text: `malformed message from service: ${e.message}`, at: this.lastMessageAt };
      return undefined;
    }
    if (msg.type === "state") {
      if (this.latest && msg.seq <= this.latest.seq) return msg;
      this.latest = { seq: msg.seq, state: msg.payload };
      this.pushTemps(msg.payload.temps);
    } else if (msg.type === "error") {
      this.errorBanner = { text: `${msg.payload.code}: ${msg.payload.message}`, at: this.lastMessageAt };
    }
    return msg;
  }

  private pushTemps(temps: number[]): void {
    for (const g of MOTOR_GROUPS) {
      const ms = [...Array(NUM_MOTORS).keys()].filter((m) => motorGroup(m) === g);
      const line = this.temps[g];
      line.push(Math.max(...ms.map((m) => temps[m])));
      if (line.length > this.sparklineLength) line.shift();
    }
  }

  private envelope(): { seq: number; t: number } {
    return { seq: this.outSeq++, t: (this.now() - this.startedAt) / 1000 };
  }

  poseMessage(): Message {
    return { type: "pose", ...this.envelope(), payload: slidersToPose(this.model, this.sliders_) };
  }

  wristMessage(): Message {
    return { type: "wrist_cmd", ...this.envelope(), payload: { ...this.sliders_.wrist } };
  }

  keypointMessage(keypoints: [number, number, number][]): Message {
    return { type: "pose", ...this.envelope(), payload: { keypoints } };
  }

  configMessage(update: ConfigUpdatePayload): Message {
    return { type: "config_update", ...this.envelope(), payload: update };
  }

  recordStartMessage(noiseSigma: number): Message {
    return { type: "record_start", ...this.envelope(), payload: { noise_sigma: noiseSigma } };
  }

  recordStopMessage(): Message {
    return { type: "record_stop", ...this.envelope(), payload: {} };
  }

  /** Frame for the latest State, or undefined before the first one arrives. */
  frame(): RenderFrame | undefined {
    if (!this.latest) return undefined;
    const s = this.latest.state;
    const skeleton = forwardKinematics(this.model, s.joints).map(([x, y, z]) => ({ x, y, depth: z }));
    const motors = s.motors.map((tick, m) => {
      const c = this.cals?.[m];
      return c ? { tick, lo: Math.min(c.p_min, c.p_max), hi: Math.max(c.p_min, c.p_max) } : { tick };
    });
    return {
      seq: this.latest.seq,
      skeleton,
      bones: BONES,
      motors,
      temps: { fingers: [...this.temps.fingers], thumb: [...this.temps.thumb], wrist: [...this.temps.wrist] },
      residual: s.residual,
      recording: s.recording,
    };
  }
}
