export const SCHEMA_VERSION = 1;
export const DEMO_SCHEMA_VERSION = 1;
export const NUM_JOINTS = 20;
export const NUM_MOTORS = 16;
export const NUM_KEYPOINTS = 21;
export const MAX_MESSAGE_BYTES = 1 << 20;

export class SchemaError extends Error {
  override name = "SchemaError";
}

export class FramingError extends Error {
  override name = "FramingError";
}

export type Vec3 = [number, number, number];

export interface PosePayload {
  keypoints: Vec3[]; // 21 points, meters
}

export interface WristCmdPayload {
  alpha: number; // flexion/extension, degrees
  beta: number; // radial/ulnar deviation, degrees
}

export interface ConfigUpdatePayload {
  c?: Record<number, number>;
  smoothing_lambda?: number;
}

export interface StatePayload {
  joints: number[];
  commanded: number[];
  motors: number[];
  temps: number[];
  residual: number;
  recording: boolean;
}

export interface RecordStartPayload {
  noise_sigma: number;
}

export type RecordStopPayload = Record<string, never>;

export interface ErrorPayload {
  code: string;
  message: string;
  ref_seq?: number;
}

interface Envelope<T extends string, P> {
  type: T;
  seq: number;
  t: number;
  payload: P;
}

export type Message =
  | Envelope<"pose", PosePayload>
  | Envelope<"wrist_cmd", WristCmdPayload>
  | Envelope<"config_update", ConfigUpdatePayload>
  | Envelope<"state", StatePayload>
  | Envelope<"record_start", RecordStartPayload>
  | Envelope<"record_stop", RecordStopPayload>
  | Envelope<"error", ErrorPayload>;

export type MessageType = Message["type"];

export const MESSAGE_TYPES: readonly MessageType[] = [
  "pose",
  "wrist_cmd",
  "config_update",
  "state",
  "record_start",
  "record_stop",
  "error",
];

type Json = unknown;

function isObject(v: Json): v is Record<string, Json> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function field(obj: Record<string, Json>, key: string): Json {
  if (!(key in obj)) throw new SchemaError(`missing field '${key}'`);
  return obj[key];
}

function finite(obj: Record<string, Json>, key: string): number {
  const v = field(obj, key);
  if (typeof v !== "number") throw new SchemaError(`field '${key}' must be a number`);
  if (!Number.isFinite(v)) throw new SchemaError(`field '${key}' must be finite`);
  return v;
}

function numbers(obj: Record<string, Json>, key: string, n: number): number[] {
  const v = field(obj, key);
  if (!Array.isArray(v) || v.length !== n) throw new SchemaError(`field '${key}' must hold ${n} numbers`);
  for (const x of v) if (typeof x !== "number") throw new SchemaError(`field '${key}' must hold numbers`);
  return v as number[];
}

function str(obj: Record<string, Json>, key: string): string {
  const v = field(obj, key);
  if (typeof v !== "string") throw new SchemaError(`field '${key}' must be a string`);
  return v;
}

function unsigned(v: Json, what: string): number {
  if (typeof v !== "number" || !Number.isInteger(v) || v < 0) {
    throw new SchemaError(`'${what}' must be a non-negative integer`);
  }
  return v;
}

function parsePayload(type: MessageType, p: Json): Message["payload"] {
  if (!isObject(p)) throw new SchemaError("payload must be an object");
  switch (type) {
    case "pose": {
      const kps = field(p, "keypoints");
      if (!Array.isArray(kps) || kps.length !== NUM_KEYPOINTS) {
        throw new SchemaError(`pose payload must hold 21 keypoints, got ${Array.isArray(kps) ? kps.length : 0}`);
      }
      const keypoints = kps.map((k) => {
        if (!Array.isArray(k) || k.length !== 3) throw new SchemaError("keypoint must be [x, y, z]");
        for (const x of k) if (typeof x !== "number") throw new SchemaError("keypoint coordinates must be numbers");
        return [k[0], k[1], k[2]] as Vec3;
      });
      return { keypoints };
    }
    case "wrist_cmd":
      return { alpha: finite(p, "alpha"), beta: finite(p, "beta") };
    case "config_update": {
      const out: ConfigUpdatePayload = {};
      if ("c" in p) {
        const c = p.c;
        if (!isObject(c)) throw new SchemaError("'c' must map motor index to scaling factor");
        out.c = {};
        for (const [key, value] of Object.entries(c)) {
          const motor = /^\d+$/.test(key) ? Number(key) : -1;
          if (motor < 0 || motor >= NUM_MOTORS) throw new SchemaError(`unknown motor '${key}'`);
          if (typeof value !== "number") throw new SchemaError("scaling factor must be a number");
          out.c[motor] = value;
        }
      }
      if ("smoothing_lambda" in p) out.smoothing_lambda = finite(p, "smoothing_lambda");
      return out;
    }
    case "state": {
      const recording = field(p, "recording");
      if (typeof recording !== "boolean") throw new SchemaError("field 'recording' must be a boolean");
      return {
        joints: numbers(p, "joints", NUM_JOINTS),
        commanded: numbers(p, "commanded", NUM_JOINTS),
        motors: numbers(p, "motors", NUM_MOTORS),
        temps: numbers(p, "temps", NUM_MOTORS),
        residual: finite(p, "residual"),
        recording,
      };
    }
    case "record_start":
      return { noise_sigma: finite(p, "noise_sigma") };
    case "record_stop":
      return {};
    case "error": {
      const out: ErrorPayload = { code: str(p, "code"), message: str(p, "message") };
      if ("ref_seq" in p) out.ref_seq = unsigned(p.ref_seq, "ref_seq");
      return out;
    }
  }
}

/** Validates a parsed JSON value against the service schema. Throws SchemaError. */
export function messageFromJson(j: Json): Message {
  if (!isObject(j)) throw new SchemaError("message must be a JSON object");
  if (field(j, "v") !== SCHEMA_VERSION) throw new SchemaError("unsupported message version");
  const seq = unsigned(field(j, "seq"), "seq");
  const t = finite(j, "t");
  const type = field(j, "type");
  if (typeof type !== "string" || !(MESSAGE_TYPES as readonly string[]).includes(type)) {
    throw new SchemaError(`unknown message type '${String(type)}'`);
  }
  const payload = parsePayload(type as MessageType, field(j, "payload"));
  return { type, seq, t, payload } as Message;
}

export function toJson(msg: Message): Record<string, Json> {
  let payload: Json = msg.payload;
  if (msg.type === "config_update") {
    const p: Record<string, Json> = {};
    if (msg.payload.c && Object.keys(msg.payload.c).length > 0) p.c = msg.payload.c;
    if (msg.payload.smoothing_lambda !== undefined) p.smoothing_lambda = msg.payload.smoothing_lambda;
    payload = p;
  }
  return { v: SCHEMA_VERSION, type: msg.type, seq: msg.seq, t: msg.t, payload };
}

export function encodeMessage(msg: Message): string {
  return JSON.stringify(toJson(msg));
}

export function decodeMessage(text: string): Message {
  let j: Json;
  try {
    j = JSON.parse(text);
  } catch (e) {
    throw new SchemaError(`message is not valid JSON: ${(e as Error).message}`);
  }
  return messageFromJson(j);
}

export interface DemonstrationRecord {
  t: number;
  proprio: number[];
  motor: number[];
  action: number[];
  noise_applied: number[];
  arm: null;
}

/** One line of a demonstration file. The arm block is reserved and always null. */
export function demonstrationFromJson(j: Json): DemonstrationRecord {
  if (!isObject(j)) throw new SchemaError("demonstration record must be a JSON object");
  if (field(j, "v") !== DEMO_SCHEMA_VERSION) throw new SchemaError("unsupported demonstration version");
  return {
    t: finite(j, "t"),
    proprio: numbers(j, "proprio", NUM_JOINTS),
    motor: numbers(j, "motor", NUM_MOTORS),
    action: numbers(j, "action", NUM_JOINTS),
    noise_applied: numbers(j, "noise_applied", NUM_JOINTS),
    arm: null,
  };
}

/** 4-byte big-endian length, then UTF-8 JSON. */
export function frameMessage(text: string): Buffer {
  const body = Buffer.from(text, "utf8");
  if (body.length > MAX_MESSAGE_BYTES) throw new FramingError(`message of ${body.length} bytes exceeds limit`);
  const head = Buffer.alloc(4);
  head.writeUInt32BE(body.length, 0);
  return Buffer.concat([head, body]);
}

export class MessageFramer {
  private buffer = Buffer.alloc(0);

  feed(chunk: Buffer): void {
    this.buffer = Buffer.concat([this.buffer, chunk]);
  }

  next(): string | undefined {
    if (this.buffer.length < 4) return undefined;
    const n = this.buffer.readUInt32BE(0);
    if (n > MAX_MESSAGE_BYTES) throw new FramingError(`frame of ${n} bytes exceeds limit`);
    if (this.buffer.length < 4 + n) return undefined;
    const text = this.buffer.subarray(4, 4 + n).toString("utf8");
    this.buffer = this.buffer.subarray(4 + n);
    return text;
  }
}
