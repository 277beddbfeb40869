/** Pane B: spectrogram image (when the gate allows) plus the pitch curve. */

import type { GateResult } from "./gate";
import type { PitchTrackView } from "./types";
import { timeToX } from "./heatmap";
import type { ViewportState } from "./viewport";

const FLOOR_DB = -80;

export function drawSpectrogramPane(
  canvas: HTMLCanvasElement,
  result: GateResult,
  pitch: PitchTrackView,
  view: ViewportState,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, width, height);

  if (result.kind === "placeholder") {
    ctx.fillStyle = "#aab4c0";
    ctx.font = "13px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(result.reason, width / 2, height / 2);
    ctx.textAlign = "left";
  } else if (result.kind === "image") {
    const slice = result.slice;
    const frames = slice.power.length;
    if (frames > 0) {
      const bins = slice.power[0]!.length;
      let peak = 1e-12;
      for (const row of slice.power) for (const v of row) peak = Math.max(peak, v);
      const colW = Math.max(width / frames, 1);
      for (let i = 0; i < frames; i++) {
        const t = slice.start_s + i * slice.hop_s;
        const x = timeToX(t, view, width);
        const row = slice.power[i]!;
        for (let b = 0; b < bins; b++) {
          const db = 10 * Math.log10((row[b]! + 1e-12) / peak);
          const v = Math.max(0, 1 - db / FLOOR_DB);
          if (v <= 0.02) continue;
          const y = height - (b / bins) * height;
          ctx.fillStyle = `rgba(${40 + 215 * v}, ${200 * v}, ${90 + 60 * (1 - v)}, 1)`;
          ctx.fillRect(x, y - height / bins, colW + 0.5, height / bins + 0.5);
        }
      }
    }
  }

  drawPitchCurve(ctx, pitch, view, width, height);
}

function drawPitchCurve(
  ctx: CanvasRenderingContext2D,
  pitch: PitchTrackView,
  view: ViewportState,
  width: number,
  height: number,
): void {
  ctx.strokeStyle = "#64ffda";
  ctx.lineWidth = 2;
  ctx.beginPath();
  let pen = false;
  for (let i = 0; i < pitch.t_s.length; i++) {
    const t = pitch.t_s[i]!;
    const f0 = pitch.f0_hz[i];
    if (t < view.fromS || t > view.toS || f0 == null) {
      pen = false;
      continue;
    }
    const x = timeToX(t, view, width);
    const y = height - ((f0 - 50) / (450 - 50)) * height;
    if (pen) ctx.lineTo(x, y);
    else ctx.moveTo(x, y);
    pen = true;
  }
  ctx.stroke();
}

export function drawPlayhead(
  canvas: HTMLCanvasElement,
  timeS: number,
  view: ViewportState,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  if (timeS < view.fromS || timeS > view.toS) return;
  const x = timeToX(timeS, view, canvas.width);
  ctx.strokeStyle = "#ff5d5d";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(x, 0);
  ctx.lineTo(x, canvas.height);
  ctx.stroke();
}
