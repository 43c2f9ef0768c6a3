import { describe, expect, it } from "vitest";

import { formatPercent, headline, probabilityBars } from "../src/format.js";
import { makeResult } from "./mock-server.js";

describe("percent formatting", () => {
  it("renders one decimal place", () => {
    expect(formatPercent(0.011)).toBe("1.1%");
    expect(formatPercent(0.989)).toBe("98.9%");
    expect(formatPercent(0)).toBe("0.0%");
    expect(formatPercent(1)).toBe("100.0%");
  });
});

describe("probability bars", () => {
  it("labels match the result JSON to one decimal", () => {
    const result = makeResult();
    const bars = probabilityBars(result.classes, result.probabilities);
    expect(bars.map((b) => b.text)).toEqual(["A 1.1%", "B 98.9%", "C3 0.0%"]);
    expect(bars[1].winner).toBe(true);
    expect(bars[0].winner).toBe(false);
  });

  it("shows two bars in two-category mode and three after a mode switch", () => {
    const two = probabilityBars(["A", "notA"], [0.012, 0.988]);
    expect(two.map((b) => b.text)).toEqual(["A 1.2%", "not A 98.8%"]);
    const three = probabilityBars(["A", "B", "C3"], [0.2, 0.5, 0.3]);
    expect(three.length).toBe(3);
  });
});

describe("headline", () => {
  it("uses the not-type-A wording in two-category mode", () => {
    expect(headline("two", "notA", [0.012, 0.988], ["A", "notA"])).toBe("not type A, 98.8%");
    expect(headline("two", "A", [0.93, 0.07], ["A", "notA"])).toBe("type A, 93.0%");
  });

  it("labels the winning type in three-category mode", () => {
    expect(headline("three", "B", [0.011, 0.989, 0], ["A", "B", "C3"])).toBe("Type B  98.9%");
  });
});
