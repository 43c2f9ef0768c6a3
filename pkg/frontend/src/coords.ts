/**
 * Canvas <-> frame coordinate mapping.  The canvas displays the frame scaled
 * to its CSS box; drag rectangles must be inverted back into frame pixels
 * before being POSTed.
 */

import { Roi } from "./protocol.js";

export interface CanvasGeometry {
  cssWidth: number;
  cssHeight: number;
  frameWidth: number;
  frameHeight: number;
}

export function canvasToFrame(geo: CanvasGeometry, cx: number, cy: number): { x: number; y: number } {
  return {
    x: Math.round((cx * geo.frameWidth) / geo.cssWidth),
    y: Math.round((cy * geo.frameHeight) / geo.cssHeight),
  };
}

export function frameToCanvas(geo: CanvasGeometry, fx: number, fy: number): { x: number; y: number } {
  return {
    x: (fx * geo.cssWidth) / geo.frameWidth,
    y: (fy * geo.cssHeight) / geo.frameHeight,
  };
}

/** Drag endpoints (canvas px, any corner order) -> frame-space rectangle. */
export function dragToFrameRect(
  geo: CanvasGeometry,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
): Roi {
  const a = canvasToFrame(geo, Math.min(x0, x1), Math.min(y0, y1));
  const b = canvasToFrame(geo, Math.max(x0, x1), Math.max(y0, y1));
  return { x: a.x, y: a.y, w: Math.max(1, b.x - a.x), h: Math.max(1, b.y - a.y) };
}
