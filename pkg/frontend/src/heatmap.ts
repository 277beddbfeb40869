/** Pane A: phonological-category posterior heatmap with stutter-event
 * markers and dimmed therapist turns. */

import type { AnalysisBundle, EventKind, StutterEventView } from "./types";
import type { ViewportState } from "./viewport";

const EVENT_COLORS: Record<EventKind, string> = {
  prolongation: "#e4572e",
  repetition: "#f3a712",
  block: "#9b5de5",
};

export function timeToX(tS: number, view: ViewportState, width: number): number {
  return ((tS - view.fromS) / (view.toS - view.fromS)) * width;
}

export function xToTime(x: number, view: ViewportState, width: number): number {
  return view.fromS + (x / width) * (view.toS - view.fromS);
}

function heatColor(value: number): string {
  const v = Math.max(0, Math.min(1, value));
  const light = 95 - 65 * v;
  return `hsl(215, 70%, ${light}%)`;
}

export function drawHeatmap(
  canvas: HTMLCanvasElement,
  bundle: AnalysisBundle,
  view: ViewportState,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#fafafa";
  ctx.fillRect(0, 0, width, height);

  const cats = bundle.category_posteriors;
  const rows = cats.categories.length;
  const rowH = (height - 18) / rows;
  const hop = cats.t_s.length > 1 ? Math.max(cats.t_s[1]! - cats.t_s[0]!, 0.01) : 0.01;
  const colW = Math.max((hop / (view.toS - view.fromS)) * width, 1);

  for (let i = 0; i < cats.t_s.length; i++) {
    const t = cats.t_s[i]!;
    if (t + hop < view.fromS || t > view.toS) continue;
    const x = timeToX(t, view, width);
    const column = cats.p[i]!;
    for (let r = 0; r < rows; r++) {
      ctx.fillStyle = heatColor(column[r]!);
      ctx.fillRect(x, r * rowH, colW + 0.5, rowH - 1);
    }
  }

  // dim therapist turns so only client speech draws the eye
  const therapistIds = new Set(
    bundle.turns.filter((t) => t.label === "therapist").map((t) => t.segment_id),
  );
  ctx.fillStyle = "rgba(120, 120, 120, 0.45)";
  for (const segment of bundle.segments) {
    if (!therapistIds.has(segment.id)) continue;
    const a = Math.max(timeToX(segment.start_s, view, width), 0);
    const b = Math.min(timeToX(segment.end_s, view, width), width);
    if (b > 0 && a < width) ctx.fillRect(a, 0, b - a, height - 18);
  }

  for (const event of bundle.events) {
    const a = Math.max(timeToX(event.start_s, view, width), 0);
    const b = Math.min(timeToX(event.end_s, view, width), width);
    if (b <= 0 || a >= width) continue;
    ctx.fillStyle = EVENT_COLORS[event.kind] + "55";
    ctx.fillRect(a, 0, Math.max(b - a, 2), height - 18);
    ctx.fillStyle = EVENT_COLORS[event.kind];
    ctx.fillRect(a, height - 16, Math.max(b - a, 2), 14);
  }

  ctx.fillStyle = "#333";
  ctx.font = "10px sans-serif";
  cats.categories.forEach((name, r) => {
    ctx.fillText(name, 2, r * rowH + 10);
  });
}

/** The event under an x pixel, for tooltips and click-to-seek. */
export function eventAtX(
  x: number,
  bundle: AnalysisBundle,
  view: ViewportState,
  width: number,
): StutterEventView | null {
  const t = xToTime(x, view, width);
  for (const event of bundle.events) {
    if (t >= event.start_s && t <= event.end_s) return event;
  }
  return null;
}

export function describeEvidence(event: StutterEventView): string {
  const parts = Object.entries(event.evidence).map(([key, value]) => {
    const rendered =
      typeof value === "number" ? (value as number).toFixed(3) : JSON.stringify(value);
    return `${key}=${rendered}`;
  });
  return `${event.kind} (score ${event.score.toFixed(2)}): ${parts.join(", ")}`;
}
