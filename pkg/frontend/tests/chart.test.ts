// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import type { LossPoint } from "../src/api.js";
import { LossChart, polylineFor, TAIL_POINTS } from "../src/chart.js";

function point(step: number, total: number, mse: number, clip = 0): LossPoint {
  return { step, t: 500, total, mse, clip };
}

describe("polylineFor", () => {
  it("maps known points into chart coordinates", () => {
    const points = [point(0, 4, 1), point(1, 2, 0.5), point(2, 0, 0)];
    // viewBox 420x180 with 8px padding: x spans 8..412, y spans 8..172
    // (top value hi maps to y=8, bottom value lo maps to y=172).
    expect(polylineFor(points, "total", 0, 4)).toBe("8.0,8.0 210.0,90.0 412.0,172.0");
  });

  it("returns an empty string for no points", () => {
    expect(polylineFor([], "total", 0, 1)).toBe("");
  });

  it("pins a single point to the left edge without dividing by zero", () => {
    const line = polylineFor([point(0, 1, 1)], "total", 0, 2);
    expect(line).toBe("8.0,90.0");
  });

  it("handles a flat series (lo == hi) without NaN", () => {
    const points = [point(0, 3, 3), point(1, 3, 3)];
    const line = polylineFor(points, "total", 3, 3);
    expect(line).not.toContain("NaN");
    expect(line.split(" ")).toHaveLength(2);
  });
});

describe("LossChart", () => {
  it("draws only the last 50 points", () => {
    const chart = new LossChart(document);
    const loss = Array.from({ length: TAIL_POINTS + 17 }, (_, i) => point(i, 10 - i * 0.1, 1));
    chart.update(loss);
    expect(chart.pointCount("total")).toBe(TAIL_POINTS);
    expect(chart.pointCount("mse")).toBe(TAIL_POINTS);
  });

  it("hides the clip series while every clip value is zero", () => {
    const chart = new LossChart(document);
    chart.update([point(0, 2, 0.5, 0), point(1, 1, 0.25, 0)]);
    const clipLine = chart.svg.querySelector('polyline[data-series="clip"]')!;
    expect(clipLine.getAttribute("visibility")).toBe("hidden");
    expect(chart.pointCount("clip")).toBe(0);

    chart.update([point(0, 2, 0.5, 0.1), point(1, 1, 0.25, 0.05)]);
    expect(clipLine.getAttribute("visibility")).toBe("visible");
    expect(chart.pointCount("clip")).toBe(2);
  });

  it("labels the newest point with its loss terms", () => {
    const chart = new LossChart(document);
    chart.update([point(7, 1.2345, 0.25, 0.5)]);
    const label = chart.svg.querySelector("text")!;
    expect(label.textContent).toBe("step 7: total 1.2345 mse 0.2500 clip 0.5000");

    chart.update([point(8, 1, 0.25)]);
    expect(label.textContent).toBe("step 8: total 1.0000 mse 0.2500");
  });

  it("says it is waiting when there are no loss entries yet", () => {
    const chart = new LossChart(document);
    chart.update([]);
    const label = chart.svg.querySelector("text")!;
    expect(label.textContent).toBe("waiting for loss entries");
    expect(chart.pointCount("total")).toBe(0);
  });

  it("counts every redraw", () => {
    const chart = new LossChart(document);
    expect(chart.updates).toBe(0);
    chart.update([point(0, 2, 0.5)]);
    chart.update([point(0, 2, 0.5), point(1, 1.5, 0.4)]);
    chart.update([]);
    expect(chart.updates).toBe(3);
  });
});
