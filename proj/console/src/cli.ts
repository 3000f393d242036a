#!/usr/bin/env node
import { readFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { ServiceConnection } from "./connection.js";
import { DIGITS, loadHandModel } from "./model.js";
import { renderText } from "./render.js";
import { Vec3 } from "./schema.js";
import { ConsoleSession } from "./session.js";
import { loadCalibration, whatIfScaling } from "./whatif.js";

const { values } = parseArgs({
  options: {
    host: { type: "string", default: "127.0.0.1" },
    port: { type: "string", default: "7600" },
    model: { type: "string", default: "config/hand_model.json" },
    calib: { type: "string" },
    curl: { type: "string", default: "0,0,0,0,0" },
    spread: { type: "string", default: "0,0,0,0,0" },
    wrist: { type: "string", default: "0,0" },
    keypoints: { type: "string" },
    record: { type: "string" },
    scale: { type: "string" },
    seconds: { type: "string", default: "5" },
  },
});

const nums = (s: string) => s.split(",").map(Number);
const model = loadHandModel(values.model!);
const cals = values.calib ? loadCalibration(values.calib) : undefined;
const session = new ConsoleSession(model, { calibrations: cals });

const curl = nums(values.curl!), spread = nums(values.spread!), wrist = nums(values.wrist!);
const s = session.sliders;
DIGITS.forEach((d, i) => {
  s.curl[d] = curl[i] ?? 0;
  s.spread[d] = spread[i] ?? 0;
});
s.wrist = { alpha: wrist[0] ?? 0, beta: wrist[1] ?? 0 };
session.setSliders(s);

const conn = await ServiceConnection.open(
  values.host!,
  Number(values.port),
  (text) => session.receive(text),
  () => process.exit(0),
);

if (values.scale) {
  if (!cals) throw new Error("--scale needs --calib");
  const [motor, c] = nums(values.scale);
  const { overlay, update } = whatIfScaling(model, cals, session.latestState?.joints ?? new Array(20).fill(0), { [motor]: c });
  const o = overlay[0];
  console.log(`what-if motor ${motor}: ${o.current.before.toFixed(1)} -> ${o.current.after.toFixed(1)} ticks at ${o.current.theta.toFixed(1)} deg`);
  conn.send(session.configMessage(update));
}
if (values.record !== undefined) conn.send(session.recordStartMessage(Number(values.record)));

if (values.keypoints) {
  session.inputMode = "keypoint_file";
  for (const line of readFileSync(values.keypoints, "utf8").split("\n")) {
    if (!line.trim()) continue;
    conn.send(session.keypointMessage(JSON.parse(line).keypoints as Vec3[]));
  }
} else {
  conn.send(session.poseMessage());
}
conn.send(session.wristMessage());

const timer = setInterval(() => {
  const f = session.frame();
  if (f) console.log(renderText(f, session.latestState!.joints, session.banner()) + "\n");
  else console.log(session.banner() ?? "waiting for state");
}, 1000);

setTimeout(() => {
  clearInterval(timer);
  if (values.record !== undefined) conn.send(session.recordStopMessage());
  conn.close();
}, Number(values.seconds) * 1000);
