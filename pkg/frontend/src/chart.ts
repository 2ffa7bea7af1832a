// Pure SVG geometry for the run-detail chart: equity line, long-position
// shading and trade markers. Returns strings/coords so tests need no DOM.

import type { EquityPoint, Marker } from "./model.js";

export interface ChartLayout {
  width: number;
  height: number;
  padding: number;
}

export const DEFAULT_LAYOUT: ChartLayout = { width: 720, height: 240, padding: 12 };

export interface Scale {
  x(index: number): number;
  y(value: number): number;
}

export function makeScale(points: EquityPoint[], layout: ChartLayout): Scale {
  const values = points.map((p) => p.value);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const innerW = layout.width - 2 * layout.padding;
  const innerH = layout.height - 2 * layout.padding;
  const denom = Math.max(1, points.length - 1);
  return {
    x: (index) => layout.padding + (index / denom) * innerW,
    y: (value) => layout.padding + (1 - (value - lo) / span) * innerH,
  };
}

export function equityPath(points: EquityPoint[], layout: ChartLayout = DEFAULT_LAYOUT): string {
  if (points.length === 0) return "";
  const scale = makeScale(points, layout);
  return points
    .map((p, i) => `${i === 0 ? "M" : "L"}${scale.x(i).toFixed(2)},${scale.y(p.value).toFixed(2)}`)
    .join(" ");
}

export interface MarkerDot {
  cx: number;
  cy: number;
  color: string;
  label: string;
}

/** One dot per marker; off-spine markers are dropped (cannot be placed). */
export function markerDots(
  markers: Marker[],
  points: EquityPoint[],
  layout: ChartLayout = DEFAULT_LAYOUT,
): MarkerDot[] {
  const scale = makeScale(points, layout);
  return markers
    .filter((m) => m.index >= 0)
    .map((m) => ({
      cx: scale.x(m.index),
      cy: scale.y(m.value),
      color: m.color,
      label: `${m.action} ${m.date}`,
    }));
}

export interface SpanRect {
  x: number;
  width: number;
}

export function spanRects(
  spans: Array<[string, string | null]>,
  points: EquityPoint[],
  layout: ChartLayout = DEFAULT_LAYOUT,
): SpanRect[] {
  const scale = makeScale(points, layout);
  const spine = new Map(points.map((p, i) => [p.date, i]));
  const rects: SpanRect[] = [];
  for (const [startDate, endDate] of spans) {
    const start = spine.get(startDate);
    if (start === undefined) continue;
    const end = endDate === null ? points.length - 1 : (spine.get(endDate) ?? points.length - 1);
    rects.push({ x: scale.x(start), width: Math.max(1, scale.x(end) - scale.x(start)) });
  }
  return rects;
}
