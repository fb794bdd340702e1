// Overlay drawing on a layered canvas above the raw page image. Every
// mark comes from a server response document; nothing is segmented here.
// Colors match the CLI overlay: top blue, bottom green, middle red.

import type { PageSegmentation, TextLineInfo } from "./types.js";

export const TOP_COLOR = "#285aff";
export const BOTTOM_COLOR = "#28c83c";
export const MIDDLE_COLOR = "#e62828";
export const BBOX_COLOR = "#fad228";
export const NOISE_FILL = "rgba(120, 120, 120, 0.55)";

// The part of CanvasRenderingContext2D the overlay needs; tests supply a
// recording implementation.
type Style = string | CanvasGradient | CanvasPattern;

export interface OverlayContext {
  strokeStyle: Style;
  fillStyle: Style;
  lineWidth: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
}

function drawFit(
  ctx: OverlayContext,
  line: TextLineInfo,
  which: "top" | "middle" | "bottom",
  color: string,
): void {
  const fit = line[which];
  const [x0, x1] = line.x_span;
  ctx.strokeStyle = color;
  ctx.beginPath();
  ctx.moveTo(x0, fit.slope * x0 + fit.intercept);
  ctx.lineTo(x1 + 1, fit.slope * (x1 + 1) + fit.intercept);
  ctx.stroke();
}

/** Paint one segmentation response. Returns counts for status display. */
export function renderOverlay(
  ctx: OverlayContext,
  seg: PageSegmentation,
): { boxes: number; fitLines: number; dimmed: number } {
  ctx.clearRect(0, 0, seg.width, seg.height);
  const noise = new Set(seg.noise_ids);
  let boxes = 0;
  let dimmed = 0;
  ctx.lineWidth = 1;
  for (const blob of seg.blobs) {
    const [x0, y0, x1, y1] = blob.bbox;
    if (noise.has(blob.id)) {
      ctx.fillStyle = NOISE_FILL;
      ctx.fillRect(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
      dimmed += 1;
    } else {
      ctx.strokeStyle = BBOX_COLOR;
      ctx.strokeRect(x0 + 0.5, y0 + 0.5, x1 - x0 + 1, y1 - y0 + 1);
      boxes += 1;
    }
  }
  let fitLines = 0;
  for (const line of seg.lines) {
    drawFit(ctx, line, "top", TOP_COLOR);
    drawFit(ctx, line, "bottom", BOTTOM_COLOR);
    drawFit(ctx, line, "middle", MIDDLE_COLOR);
    fitLines += 3;
  }
  return { boxes, fitLines, dimmed };
}
