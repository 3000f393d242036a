import { JOINT_NAMES } from "./model.js";
import { MOTOR_GROUPS, RenderFrame } from "./session.js";

const SPARK = "▁▂▃▄▅▆▇█";

export function sparkline(values: number[], lo: number, hi: number): string {
  return values
    .map((v) => SPARK[Math.round(((Math.min(hi, Math.max(lo, v)) - lo) / (hi - lo || 1)) * (SPARK.length - 1))])
    .join("");
}

function bar(tick: number, lo = 0, hi = 4095, width = 24): string {
  const f = Math.min(1, Math.max(0, (tick - lo) / (hi - lo || 1)));
  const n = Math.round(f * width);
  return "[" + "#".repeat(n) + ".".repeat(width - n) + "]";
}

/** Plain-text telemetry panel. */
export function renderText(frame: RenderFrame, joints: number[], banner?: string): string {
  const lines: string[] = [];
  if (banner) lines.push(`!! ${banner}`);
  lines.push(`state #${frame.seq}  residual ${frame.residual.toExponential(2)}  ${frame.recording ? "REC" : "idle"}`);
  for (let i = 0; i < JOINT_NAMES.length; i += 4) {
    lines.push(
      JOINT_NAMES.slice(i, i + 4)
        .map((n, k) => `${n.padEnd(16)}${joints[i + k].toFixed(1).padStart(7)}`)
        .join("  "),
    );
  }
  frame.motors.forEach((m, i) => lines.push(`m${String(i).padStart(2)} ${bar(m.tick, m.lo, m.hi)} ${m.tick.toFixed(0)}`));
  for (const g of MOTOR_GROUPS) {
    const t = frame.temps[g];
    const last = t.length ? t[t.length - 1].toFixed(2) : "-";
    lines.push(`${g.padEnd(8)} ${sparkline(t.slice(-40), 20, 60)} ${last} C`);
  }
  return lines.join("\n");
}
