/** Wires the stream, state machine, renderer and operator controls. */

import { ServiceClient } from "./client.js";
import { dragToFrameRect } from "./coords.js";
import { Roi } from "./protocol.js";
import { Dom, Renderer } from "./render.js";
import {
  PairBuffer,
  ViewerState,
  initialState,
  onConnected,
  onControlRejected,
  onDisconnected,
  onPair,
  onRoiPosted,
} from "./state.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "http://127.0.0.1:8750";

const dom: Dom = {
  canvas: document.getElementById("frame") as HTMLCanvasElement,
  headline: document.getElementById("headline")!,
  bars: document.getElementById("bars")!,
  sparkline: document.getElementById("sparkline") as HTMLCanvasElement,
  staleBanner: document.getElementById("stale")!,
  toast: document.getElementById("toast")!,
  status: document.getElementById("status")!,
};

let state: ViewerState = initialState();
const buffer = new PairBuffer();
const client = new ServiceClient(baseUrl);
const renderer = new Renderer(dom);

let dragStart: { x: number; y: number } | null = null;
let dragRect: Roi | null = null;
let rendering = false;

function scheduleRender(): void {
  if (rendering) return;
  rendering = true;
  requestAnimationFrame(async () => {
    rendering = false;
    await renderer.render(state, Date.now(), dragRect);
  });
}

function connect(): void {
  client.connect({
    onOpen: () => {
      state = onConnected(state, Date.now());
      scheduleRender();
    },
    onClose: () => {
      state = onDisconnected(state);
      scheduleRender();
      setTimeout(connect, 2000);
    },
    onResult: (result) => {
      const pair = buffer.pushResult(result);
      if (pair !== null) state = onPair(state, pair, Date.now());
      else state = { ...state, lastMessageAt: Date.now() };
      scheduleRender();
    },
    onFrame: (frame) => {
      const pair = buffer.pushFrame(frame);
      if (pair !== null) state = onPair(state, pair, Date.now());
      else state = { ...state, lastMessageAt: Date.now() };
      scheduleRender();
    },
  });
}

// stale banner refresh even when no messages arrive
setInterval(scheduleRender, 500);

// --- ROI drag ---------------------------------------------------------------

function canvasPoint(ev: MouseEvent): { x: number; y: number } {
  const rect = dom.canvas.getBoundingClientRect();
  return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
}

dom.canvas.addEventListener("mousedown", (ev) => {
  dragStart = canvasPoint(ev);
});

function canvasGeometry() {
  const rect = dom.canvas.getBoundingClientRect();
  return {
    cssWidth: rect.width,
    cssHeight: rect.height,
    frameWidth: dom.canvas.width,
    frameHeight: dom.canvas.height,
  };
}

dom.canvas.addEventListener("mousemove", (ev) => {
  if (dragStart === null || state.displayed === null) return;
  const point = canvasPoint(ev);
  // drag rectangle is tracked in frame pixels for rendering
  dragRect = dragToFrameRect(canvasGeometry(), dragStart.x, dragStart.y, point.x, point.y);
  scheduleRender();
});

window.addEventListener("mouseup", async (ev) => {
  if (dragStart === null) return;
  const start = dragStart;
  dragStart = null;
  if (state.displayed === null) return;
  const point = canvasPoint(ev as MouseEvent);
  const moved = Math.abs(point.x - start.x) > 3 && Math.abs(point.y - start.y) > 3;
  dragRect = null;
  if (!moved) {
    scheduleRender();
    return;
  }
  const rect = dragToFrameRect(canvasGeometry(), start.x, start.y, point.x, point.y);
  const outcome = await client.setRoi(rect);
  state = outcome.ok
    ? onRoiPosted(state, outcome.applied as unknown as Roi & { kind: string })
    : onControlRejected(state, outcome.reason);
  scheduleRender();
});

// --- mode / smoothing controls ----------------------------------------------

document.getElementById("mode-two")!.addEventListener("click", () => postMode("two"));
document.getElementById("mode-three")!.addEventListener("click", () => postMode("three"));

async function postMode(mode: "two" | "three"): Promise<void> {
  const outcome = await client.postControl({ kind: "set_mode", mode });
  if (!outcome.ok) {
    state = onControlRejected(state, outcome.reason);
    scheduleRender();
  }
}

const alphaSlider = document.getElementById("alpha") as HTMLInputElement;
const alphaLabel = document.getElementById("alpha-label")!;
alphaSlider.addEventListener("change", async () => {
  const alpha = Number(alphaSlider.value);
  alphaLabel.textContent = alpha.toFixed(2);
  const outcome = await client.postControl({ kind: "set_smoothing", alpha });
  if (!outcome.ok) {
    state = onControlRejected(state, outcome.reason);
    scheduleRender();
  }
});

connect();
