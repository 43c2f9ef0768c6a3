/**
 * Service transport.  The WebSocket constructor and fetch are injectable so
 * tests can drive the client from a scripted mock server.
 */

import { BinaryFrame, ControlCommand, FrameResult, Roi, parseBinaryFrame, parseResult } from "./protocol.js";

export interface StreamHandlers {
  onResult(result: FrameResult): void;
  onFrame(frame: BinaryFrame): void;
  onOpen(): void;
  onClose(): void;
}

export interface WsLike {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string | ArrayBuffer }) => void) | null;
  close(): void;
}

export type WsFactory = (url: string) => WsLike;
export type FetchLike = (url: string, init?: Record<string, unknown>) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
  text(): Promise<string>;
}>;

export type ControlOutcome =
  | { ok: true; applied: Record<string, unknown> }
  | { ok: false; reason: string };

export class ServiceClient {
  private socket: WsLike | null = null;

  constructor(
    private baseUrl: string,
    private wsFactory: WsFactory = (url) => new WebSocket(url) as unknown as WsLike,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init as RequestInit),
  ) {}

  connect(handlers: StreamHandlers): void {
    const wsUrl = this.baseUrl.replace(/^http/, "ws") + "/stream";
    const socket = this.wsFactory(wsUrl);
    socket.binaryType = "arraybuffer";
    socket.onopen = () => handlers.onOpen();
    socket.onclose = () => handlers.onClose();
    socket.onerror = () => socket.close();
    socket.onmessage = (ev) => {
      if (typeof ev.data === "string") {
        handlers.onResult(parseResult(ev.data));
      } else {
        handlers.onFrame(parseBinaryFrame(ev.data));
      }
    };
    this.socket = socket;
  }

  disconnect(): void {
    this.socket?.close();
    this.socket = null;
  }

  /** POST one control command; exactly one request per call. */
  async postControl(command: ControlCommand): Promise<ControlOutcome> {
    const response = await this.fetchImpl(`${this.baseUrl}/control`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(command),
    });
    if (!response.ok) {
      return { ok: false, reason: await response.text() };
    }
    const body = (await response.json()) as { applied: Record<string, unknown> };
    return { ok: true, applied: body.applied };
  }

  async setRoi(roi: Roi): Promise<ControlOutcome> {
    return this.postControl({ kind: "set_roi", ...roi });
  }
}
