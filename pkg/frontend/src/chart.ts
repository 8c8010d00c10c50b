/**
 * Hand-rolled SVG loss chart: total, mse, and clip series over steps.
 *
 * Shows the tail the service reports (its loss window is the last 50
 * points). The clip series is omitted when every point is zero, which is
 * what a reconstruction-only run reports.
 */

import type { LossPoint } from "./api.js";

export const TAIL_POINTS = 50;

const SERIES = [
  { key: "total", color: "var(--series-total, #e0a438)" },
  { key: "mse", color: "var(--series-mse, #4f9cf0)" },
  { key: "clip", color: "var(--series-clip, #5fc08a)" },
] as const;

type SeriesKey = (typeof SERIES)[number]["key"];

const WIDTH = 420;
const HEIGHT = 180;
const PAD = 8;

/** Map points onto an SVG polyline string, scaled to the value range. */
export function polylineFor(
  points: readonly LossPoint[],
  key: SeriesKey,
  lo: number,
  hi: number,
): string {
  if (points.length === 0) return "";
  const span = hi - lo || 1;
  const step = points.length > 1 ? (WIDTH - 2 * PAD) / (points.length - 1) : 0;
  return points
    .map((p, i) => {
      const x = PAD + i * step;
      const y = HEIGHT - PAD - ((p[key] - lo) / span) * (HEIGHT - 2 * PAD);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}

export class LossChart {
  readonly svg: SVGSVGElement;
  private readonly lines = new Map<SeriesKey, SVGPolylineElement>();
  private readonly label: SVGTextElement;
  /** How many times the chart has redrawn; the e2e watches this grow. */
  updates = 0;

  constructor(doc: Document = document) {
    const ns = "http://www.w3.org/2000/svg";
    this.svg = doc.createElementNS(ns, "svg");
    this.svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
    this.svg.classList.add("loss-chart");
    for (const series of SERIES) {
      const line = doc.createElementNS(ns, "polyline");
      line.setAttribute("fill", "none");
      line.setAttribute("stroke", series.color);
      line.setAttribute("stroke-width", "1.5");
      line.dataset.series = series.key;
      this.svg.appendChild(line);
      this.lines.set(series.key, line);
    }
    this.label = doc.createElementNS(ns, "text");
    this.label.setAttribute("x", String(PAD));
    this.label.setAttribute("y", "14");
    this.label.classList.add("chart-label");
    this.svg.appendChild(this.label);
  }

  update(loss: readonly LossPoint[]): void {
    const points = loss.slice(-TAIL_POINTS);
    const clipActive = points.some((p) => p.clip !== 0);
    const values = points.flatMap((p) =>
      clipActive ? [p.total, p.mse, p.clip] : [p.total, p.mse],
    );
    const lo = values.length ? Math.min(...values) : 0;
    const hi = values.length ? Math.max(...values) : 1;
    for (const [key, line] of this.lines) {
      if (key === "clip" && !clipActive) {
        line.setAttribute("points", "");
        line.setAttribute("visibility", "hidden");
        continue;
      }
      line.setAttribute("visibility", "visible");
      line.setAttribute("points", polylineFor(points, key, lo, hi));
    }
    const last = points[points.length - 1];
    this.label.textContent = last
      ? `step ${last.step}: total ${last.total.toFixed(4)} mse ${last.mse.toFixed(4)}` +
        (clipActive ? ` clip ${last.clip.toFixed(4)}` : "")
      : "waiting for loss entries";
    this.updates += 1;
  }

  pointCount(key: SeriesKey = "total"): number {
    const attr = this.lines.get(key)?.getAttribute("points") ?? "";
    return attr === "" ? 0 : attr.split(" ").length;
  }
}
