/**
 * Viewer state machine, kept free of DOM concerns so it can be driven by
 * scripted message sequences in tests.
 *
 * The displayed image and the displayed result always share one frame index:
 * results and binary frames are buffered separately and only committed to
 * the display once both halves of a pair have arrived.
 */

import { BinaryFrame, FrameResult, Roi, roisEqual } from "./protocol.js";

export const HISTORY_LIMIT = 300;
export const STALE_AFTER_MS = 2000;

export interface DisplayedPair {
  frameIndex: number;
  result: FrameResult;
  png: Uint8Array;
}

export interface ViewerState {
  connected: boolean;
  lastMessageAt: number | null;
  displayed: DisplayedPair | null;
  /** last POSTed (server-clamped) rectangle not yet confirmed by a result */
  pendingRoi: Roi | null;
  history: FrameResult[];
  toast: string | null;
}

export function initialState(): ViewerState {
  return {
    connected: false,
    lastMessageAt: null,
    displayed: null,
    pendingRoi: null,
    history: [],
    toast: null,
  };
}

/** Pairs results with their binary frames; tolerates either arriving first. */
export class PairBuffer {
  private results = new Map<number, FrameResult>();
  private frames = new Map<number, Uint8Array>();
  private static LIMIT = 32;

  pushResult(result: FrameResult): DisplayedPair | null {
    this.results.set(result.frame_index, result);
    this.trim(this.results);
    return this.tryPair(result.frame_index);
  }

  pushFrame(frame: BinaryFrame): DisplayedPair | null {
    this.frames.set(frame.frameIndex, frame.png);
    this.trim(this.frames);
    return this.tryPair(frame.frameIndex);
  }

  private tryPair(index: number): DisplayedPair | null {
    const result = this.results.get(index);
    const png = this.frames.get(index);
    if (result === undefined || png === undefined) {
      return null;
    }
    // committed pairs and anything older can be dropped
    for (const key of [...this.results.keys()]) {
      if (key <= index) this.results.delete(key);
    }
    for (const key of [...this.frames.keys()]) {
      if (key <= index) this.frames.delete(key);
    }
    return { frameIndex: index, result, png };
  }

  private trim(map: Map<number, unknown>): void {
    while (map.size > PairBuffer.LIMIT) {
      const oldest = Math.min(...map.keys());
      map.delete(oldest);
    }
  }
}

export function onConnected(state: ViewerState, now: number): ViewerState {
  return { ...state, connected: true, lastMessageAt: now };
}

export function onDisconnected(state: ViewerState): ViewerState {
  return { ...state, connected: false };
}

/** Commit a completed pair: display it, extend history, reconcile the ROI. */
export function onPair(state: ViewerState, pair: DisplayedPair, now: number): ViewerState {
  if (state.displayed !== null && pair.frameIndex <= state.displayed.frameIndex) {
    return { ...state, lastMessageAt: now };
  }
  const history = [...state.history, pair.result];
  if (history.length > HISTORY_LIMIT) {
    history.splice(0, history.length - HISTORY_LIMIT);
  }
  let pendingRoi = state.pendingRoi;
  if (pendingRoi !== null && roisEqual(pair.result.roi, pendingRoi)) {
    pendingRoi = null; // server confirmed: the outline snaps to the result
  }
  return { ...state, displayed: pair, history, pendingRoi, lastMessageAt: now };
}

export function onRoiPosted(state: ViewerState, applied: Roi): ViewerState {
  return { ...state, pendingRoi: applied, toast: null };
}

export function onControlRejected(state: ViewerState, reason: string): ViewerState {
  // outline reverts to whatever the stream last reported
  return { ...state, pendingRoi: null, toast: reason };
}

export function isStale(state: ViewerState, now: number): boolean {
  return state.lastMessageAt !== null && now - state.lastMessageAt > STALE_AFTER_MS;
}

/** Rectangle the outline should show: optimistic if a command is in flight. */
export function outlineRoi(state: ViewerState): Roi | null {
  if (state.pendingRoi !== null) return state.pendingRoi;
  return state.displayed?.result.roi ?? null;
}
