/** DOM rendering: frame canvas with ROI outline, bars, sparkline, banner. */

import { CanvasGeometry, frameToCanvas } from "./coords.js";
import { headline, probabilityBars } from "./format.js";
import { FrameResult, Roi } from "./protocol.js";
import { ViewerState, isStale, outlineRoi } from "./state.js";

export interface Dom {
  canvas: HTMLCanvasElement;
  headline: HTMLElement;
  bars: HTMLElement;
  sparkline: HTMLCanvasElement;
  staleBanner: HTMLElement;
  toast: HTMLElement;
  status: HTMLElement;
}

const SPARK_COLORS = ["#4cc9f0", "#f4a261", "#e76f51"];

export class Renderer {
  private bitmap: ImageBitmap | null = null;
  private bitmapIndex = -1;

  constructor(private dom: Dom) {}

  geometry(frameWidth: number, frameHeight: number): CanvasGeometry {
    const rect = this.dom.canvas.getBoundingClientRect();
    return { cssWidth: rect.width, cssHeight: rect.height, frameWidth, frameHeight };
  }

  async render(state: ViewerState, now: number, dragRect: Roi | null): Promise<void> {
    this.dom.status.textContent = state.connected ? "connected" : "disconnected";
    this.dom.status.className = state.connected ? "status ok" : "status bad";
    this.dom.staleBanner.hidden = !(isStale(state, now) || !state.connected);
    this.dom.toast.hidden = state.toast === null;
    if (state.toast !== null) this.dom.toast.textContent = state.toast;

    const pair = state.displayed;
    if (pair === null) return;

    if (pair.frameIndex !== this.bitmapIndex) {
      const blob = new Blob([pair.png.slice().buffer], { type: "image/png" });
      this.bitmap = await createImageBitmap(blob);
      this.bitmapIndex = pair.frameIndex;
    }
    if (this.bitmap === null) return;

    const canvas = this.dom.canvas;
    if (canvas.width !== this.bitmap.width || canvas.height !== this.bitmap.height) {
      canvas.width = this.bitmap.width;
      canvas.height = this.bitmap.height;
    }
    const ctx = canvas.getContext("2d");
    if (ctx === null) return;
    ctx.drawImage(this.bitmap, 0, 0);
    const roi = dragRect ?? outlineRoi(state);
    if (roi !== null) {
      ctx.strokeStyle = dragRect !== null || state.pendingRoi !== null ? "#ffd166" : "#ffffff";
      ctx.lineWidth = 2;
      ctx.setLineDash(dragRect !== null ? [6, 4] : []);
      ctx.strokeRect(roi.x + 0.5, roi.y + 0.5, roi.w, roi.h);
      ctx.setLineDash([]);
    }

    this.renderSide(pair.result);
    this.renderSparkline(state.history);
  }

  private renderSide(result: FrameResult): void {
    this.dom.headline.textContent = headline(
      result.mode, result.label, result.probabilities, result.classes,
    );
    const bars = probabilityBars(result.classes, result.probabilities);
    const container = this.dom.bars;
    container.replaceChildren();
    for (const bar of bars) {
      const row = document.createElement("div");
      row.className = bar.winner ? "bar winner" : "bar";
      const fill = document.createElement("div");
      fill.className = "fill";
      fill.style.width = `${(bar.fraction * 100).toFixed(1)}%`;
      const text = document.createElement("span");
      text.textContent = bar.text;
      row.append(fill, text);
      container.append(row);
    }
  }

  private renderSparkline(history: FrameResult[]): void {
    const canvas = this.dom.sparkline;
    const ctx = canvas.getContext("2d");
    if (ctx === null || history.length === 0) return;
    const { width, height } = canvas;
    ctx.clearRect(0, 0, width, height);
    const classes = history[history.length - 1].classes;
    const step = width / Math.max(history.length - 1, 1);
    classes.forEach((_, ci) => {
      ctx.strokeStyle = SPARK_COLORS[ci % SPARK_COLORS.length];
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      history.forEach((r, i) => {
        const p = r.probabilities[ci] ?? 0;
        const y = height - p * (height - 4) - 2;
        if (i === 0) ctx.moveTo(0, y);
        else ctx.lineTo(i * step, y);
      });
      ctx.stroke();
    });
  }
}

export function roiToCanvasRect(geo: CanvasGeometry, roi: Roi): Roi {
  const a = frameToCanvas(geo, roi.x, roi.y);
  const b = frameToCanvas(geo, roi.x + roi.w, roi.y + roi.h);
  return { x: a.x, y: a.y, w: b.x - a.x, h: b.y - a.y };
}
