// Sweep view: live success-vs-filtered curve per filter, threshold slider over
// the service's grid, plateau marker, and the apply-threshold action.

import { SweepResponse } from "./api.js";
import { chartModel, ChartModel, DEFAULT_GEOMETRY } from "./chart.js";
import { AppState } from "./state.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface SweepCallbacks {
  onFilterChange(filter: string): void;
  onApply(filter: string, threshold: number): void;
}

function svgElement<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, value);
  }
  return el;
}

export function renderChart(model: ChartModel): SVGSVGElement {
  const g = DEFAULT_GEOMETRY;
  const svg = svgElement("svg", {
    viewBox: `0 0 ${g.width} ${g.height}`,
    class: "sweep-chart",
    role: "img",
  });

  for (const tick of model.xTicks) {
    svg.appendChild(
      svgElement("line", {
        x1: String(tick.x), x2: String(tick.x),
        y1: String(g.marginTop), y2: String(g.height - g.marginBottom),
        class: "gridline",
      }),
    );
    const label = svgElement("text", {
      x: String(tick.x), y: String(g.height - g.marginBottom + 16), class: "tick-label",
      "text-anchor": "middle",
    });
    label.textContent = `${tick.value}%`;
    svg.appendChild(label);
  }
  for (const tick of model.yTicks) {
    svg.appendChild(
      svgElement("line", {
        y1: String(tick.y), y2: String(tick.y),
        x1: String(g.marginLeft), x2: String(g.width - g.marginRight),
        class: "gridline",
      }),
    );
    const label = svgElement("text", {
      x: String(g.marginLeft - 6), y: String(tick.y + 4), class: "tick-label",
      "text-anchor": "end",
    });
    label.textContent = `${tick.value}%`;
    svg.appendChild(label);
  }

  if (model.suggestedX !== null) {
    svg.appendChild(
      svgElement("line", {
        x1: String(model.suggestedX), x2: String(model.suggestedX),
        y1: String(g.marginTop), y2: String(g.height - g.marginBottom),
        class: "suggested-line",
      }),
    );
  }

  svg.appendChild(svgElement("path", { d: model.path, class: "curve" }));
  for (const point of model.points) {
    const dot = svgElement("circle", { cx: String(point.x), cy: String(point.y), r: "3", class: "dot" });
    const title = svgElement("title", {});
    title.textContent =
      `threshold ${point.threshold}: filtered ${point.filteredPct}%, success ${point.successPct}%`;
    dot.appendChild(title);
    svg.appendChild(dot);
  }
  return svg;
}

function sliderRow(
  sweep: SweepResponse,
  selectedIndex: number,
  onSelect: (index: number) => void,
): HTMLElement {
  const row = document.createElement("div");
  row.className = "slider-row";
  const slider = document.createElement("input");
  slider.type = "range";
  slider.min = "0";
  slider.max = String(sweep.points.length - 1);
  slider.value = String(selectedIndex);
  slider.addEventListener("input", () => onSelect(Number(slider.value)));
  const readout = document.createElement("span");
  readout.className = "slider-readout";
  const point = sweep.points[selectedIndex];
  const success = point.success_pct_retained === null ? "n/a" : `${point.success_pct_retained}%`;
  readout.textContent =
    `threshold ${point.threshold.toPrecision(4)} -> filtered ${point.filtered_pct}%, success ${success}`;
  row.append(slider, readout);
  return row;
}

export function renderSweepView(
  root: HTMLElement,
  state: AppState,
  filters: string[],
  selectedIndex: number,
  onSelectIndex: (index: number) => void,
  callbacks: SweepCallbacks,
  lastApplied: string | null,
): void {
  root.replaceChildren();

  const controls = document.createElement("div");
  controls.className = "sweep-controls";
  const select = document.createElement("select");
  for (const name of filters) {
    const option = document.createElement("option");
    option.value = name;
    option.textContent = name;
    option.selected = name === state.filter;
    select.appendChild(option);
  }
  select.addEventListener("change", () => callbacks.onFilterChange(select.value));
  controls.appendChild(select);
  root.appendChild(controls);

  const sweep = state.sweep;
  if (!sweep || sweep.annotation_count === 0 || sweep.points.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent =
      "No annotations yet — the sweep needs labeled candidates. Label some in the Annotate tab first.";
    root.appendChild(empty);
    return;
  }

  const meta = document.createElement("p");
  meta.className = "sweep-meta";
  const suggestion = state.suggestion;
  const suggestionText = suggestion
    ? ` — suggested ${suggestion.threshold.toPrecision(4)}${suggestion.no_plateau ? " (no plateau)" : ""}`
    : "";
  meta.textContent =
    `${sweep.annotation_count} annotated candidates, curve seq ${sweep.last_seq}` + suggestionText;
  root.appendChild(meta);

  const model = chartModel(sweep.points, suggestion ? suggestion.threshold : null);
  root.appendChild(renderChart(model));

  const safeIndex = Math.min(selectedIndex, sweep.points.length - 1);
  root.appendChild(sliderRow(sweep, safeIndex, onSelectIndex));

  const applyRow = document.createElement("div");
  applyRow.className = "apply-row";
  const applyButton = document.createElement("button");
  applyButton.className = "btn btn-apply";
  const chosen = sweep.points[safeIndex].threshold;
  applyButton.textContent = `apply ${sweep.filter} threshold ${chosen.toPrecision(4)}`;
  applyButton.addEventListener("click", () => callbacks.onApply(sweep.filter, chosen));
  applyRow.appendChild(applyButton);
  if (suggestion && model.suggestedX !== null) {
    const applySuggested = document.createElement("button");
    applySuggested.className = "btn";
    applySuggested.textContent = `apply suggested ${suggestion.threshold.toPrecision(4)}`;
    applySuggested.addEventListener("click", () => callbacks.onApply(sweep.filter, suggestion.threshold));
    applyRow.appendChild(applySuggested);
  }
  root.appendChild(applyRow);

  if (lastApplied) {
    const confirmation = document.createElement("pre");
    confirmation.className = "apply-result";
    confirmation.textContent = lastApplied;
    root.appendChild(confirmation);
  }
}
