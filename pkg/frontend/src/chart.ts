// Sweep-chart geometry: maps the service's tabular payload to SVG coordinates.
// Pure scaling only; points are plotted verbatim with no smoothing.

import { SweepPointDto } from "./api.js";

export interface ChartGeometry {
  width: number;
  height: number;
  marginLeft: number;
  marginRight: number;
  marginTop: number;
  marginBottom: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = {
  width: 520,
  height: 300,
  marginLeft: 48,
  marginRight: 16,
  marginTop: 12,
  marginBottom: 36,
};

export interface ChartPoint {
  x: number;
  y: number;
  threshold: number;
  filteredPct: number;
  successPct: number;
}

export interface ChartModel {
  points: ChartPoint[];
  path: string;
  suggestedX: number | null;
  xTicks: { x: number; value: number }[];
  yTicks: { y: number; value: number }[];
}

export function xScale(filteredPct: number, g: ChartGeometry): number {
  const inner = g.width - g.marginLeft - g.marginRight;
  return g.marginLeft + (filteredPct / 100) * inner;
}

export function yScale(successPct: number, g: ChartGeometry): number {
  const inner = g.height - g.marginTop - g.marginBottom;
  return g.marginTop + (1 - successPct / 100) * inner;
}

export function polylinePath(points: { x: number; y: number }[]): string {
  return points.map((p, i) => `${i === 0 ? "M" : "L"} ${p.x} ${p.y}`).join(" ");
}

export function chartModel(
  raw: SweepPointDto[],
  suggestedThreshold: number | null,
  g: ChartGeometry = DEFAULT_GEOMETRY,
): ChartModel {
  // thresholds filtering everything have no success rate; they are not drawable
  const drawable = raw
    .filter((p): p is SweepPointDto & { success_pct_retained: number } => p.success_pct_retained !== null)
    .slice()
    .sort((a, b) => a.filtered_pct - b.filtered_pct);

  const points = drawable.map((p) => ({
    x: xScale(p.filtered_pct, g),
    y: yScale(p.success_pct_retained, g),
    threshold: p.threshold,
    filteredPct: p.filtered_pct,
    successPct: p.success_pct_retained,
  }));

  let suggestedX: number | null = null;
  if (suggestedThreshold !== null) {
    const match = drawable.find((p) => p.threshold === suggestedThreshold);
    if (match) {
      suggestedX = xScale(match.filtered_pct, g);
    }
  }

  const xTicks = [0, 25, 50, 75, 100].map((value) => ({ x: xScale(value, g), value }));
  const yTicks = [0, 25, 50, 75, 100].map((value) => ({ y: yScale(value, g), value }));
  return { points, path: polylinePath(points), suggestedX, xTicks, yTicks };
}
