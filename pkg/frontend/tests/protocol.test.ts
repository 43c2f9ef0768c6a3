import { describe, expect, it } from "vitest";

import { parseBinaryFrame, parseResult, roisEqual } from "../src/protocol.js";
import { FAKE_PNG, makeResult } from "./mock-server.js";

describe("binary frame parsing", () => {
  it("splits the 8-byte little-endian index from the PNG payload", () => {
    const buf = new ArrayBuffer(8 + FAKE_PNG.length);
    new DataView(buf).setBigUint64(0, 7123n, true);
    new Uint8Array(buf, 8).set(FAKE_PNG);
    const frame = parseBinaryFrame(buf);
    expect(frame.frameIndex).toBe(7123);
    expect([...frame.png]).toEqual([...FAKE_PNG]);
  });

  it("rejects short buffers", () => {
    expect(() => parseBinaryFrame(new ArrayBuffer(4))).toThrow(/too short/);
  });
});

describe("result parsing", () => {
  it("round-trips a FrameResult", () => {
    const result = makeResult({ frame_index: 42 });
    expect(parseResult(JSON.stringify(result))).toEqual(result);
  });

  it("rejects non-result JSON", () => {
    expect(() => parseResult("{}")).toThrow(/FrameResult/);
  });
});

describe("roi equality", () => {
  it("compares all four fields", () => {
    const a = { x: 1, y: 2, w: 3, h: 4 };
    expect(roisEqual(a, { ...a })).toBe(true);
    expect(roisEqual(a, { ...a, w: 5 })).toBe(false);
  });
});
