/**
 * Wire types of the classification service.
 *
 * The /stream WebSocket interleaves text messages (FrameResult JSON) with
 * binary messages: an 8-byte little-endian frame index followed by PNG
 * bytes.  Controls are POSTed to /control as JSON.
 */

export interface Roi {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface FrameResult {
  frame_index: number;
  roi: Roi;
  mode: "two" | "three";
  label: string;
  classes: string[];
  probabilities: number[];
  timings_us: Record<string, number>;
  total_us: number;
  dropped_frames: number;
  smoothed?: number[];
  error?: string;
}

export interface BinaryFrame {
  frameIndex: number;
  png: Uint8Array;
}

export type ControlCommand =
  | { kind: "set_roi"; x: number; y: number; w: number; h: number }
  | { kind: "set_mode"; mode: "two" | "three" }
  | { kind: "set_smoothing"; alpha: number }
  | { kind: "pause" }
  | { kind: "resume" };

export function parseResult(text: string): FrameResult {
  const parsed = JSON.parse(text);
  if (typeof parsed.frame_index !== "number" || !Array.isArray(parsed.probabilities)) {
    throw new Error("not a FrameResult message");
  }
  return parsed as FrameResult;
}

export function parseBinaryFrame(data: ArrayBuffer): BinaryFrame {
  if (data.byteLength < 8) {
    throw new Error(`binary frame too short: ${data.byteLength} bytes`);
  }
  const view = new DataView(data);
  const frameIndex = Number(view.getBigUint64(0, true));
  return { frameIndex, png: new Uint8Array(data, 8) };
}

export function roisEqual(a: Roi, b: Roi): boolean {
  return a.x === b.x && a.y === b.y && a.w === b.w && a.h === b.h;
}
