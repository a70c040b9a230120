// Annotation view: paged (original, candidate) pairs with mask outlines,
// keyboard-driven labeling that POSTs immediately and advances.

import { ApiClient, CandidateItem } from "./api.js";
import { drawOutline } from "./outline.js";
import { AppState, candidateKey, currentItem } from "./state.js";

export interface AnnotateCallbacks {
  onLabel(item: CandidateItem, label: "success" | "failure"): void;
  onMove(delta: number): void;
  onPage(delta: number): void;
}

function badgeText(state: AppState, item: CandidateItem): string {
  const mark = state.marks[candidateKey(item.pair_id, item.candidate_index)];
  if (!mark) {
    return item.effective_label ? `team: ${item.effective_label}` : "unlabeled";
  }
  const suffix = mark.status === "pending" ? " (sending...)" : "";
  return `${mark.label}${suffix}`;
}

function badgeClass(state: AppState, item: CandidateItem): string {
  const mark = state.marks[candidateKey(item.pair_id, item.candidate_index)];
  if (!mark) return "badge";
  return `badge badge-${mark.label} ${mark.status === "pending" ? "badge-pending" : "badge-acked"}`;
}

function renderPair(
  api: ApiClient,
  state: AppState,
  item: CandidateItem,
  index: number,
  selected: boolean,
  callbacks: AnnotateCallbacks,
): HTMLElement {
  const card = document.createElement("div");
  card.className = selected ? "card selected" : "card";
  card.dataset.index = String(index);

  const title = document.createElement("div");
  title.className = "card-title";
  title.textContent = `${item.object_label} — ${item.pair_id.slice(0, 8)}#${item.candidate_index}`;
  card.appendChild(title);

  const row = document.createElement("div");
  row.className = "pair-row";
  for (const [label, ref, withMask] of [
    ["original", item.original_ref, true],
    ["candidate", item.image_ref, true],
  ] as const) {
    const cell = document.createElement("figure");
    cell.className = "img-cell";
    const stack = document.createElement("div");
    stack.className = "img-stack";
    const img = document.createElement("img");
    img.src = api.imageUrl(ref);
    img.alt = `${label} ${item.pair_id}`;
    stack.appendChild(img);
    if (withMask) {
      const overlay = document.createElement("canvas");
      overlay.className = "mask-overlay";
      const maskImg = new Image();
      maskImg.onload = () => {
        overlay.width = maskImg.naturalWidth;
        overlay.height = maskImg.naturalHeight;
        const ctx = overlay.getContext("2d");
        if (ctx) drawOutline(ctx, maskImg, maskImg.naturalWidth, maskImg.naturalHeight);
      };
      maskImg.src = api.imageUrl(item.mask_ref);
      stack.appendChild(overlay);
    }
    const caption = document.createElement("figcaption");
    caption.textContent = label;
    cell.appendChild(stack);
    cell.appendChild(caption);
    row.appendChild(cell);
  }
  card.appendChild(row);

  const badge = document.createElement("span");
  badge.className = badgeClass(state, item);
  badge.textContent = badgeText(state, item);
  card.appendChild(badge);

  const buttons = document.createElement("div");
  buttons.className = "label-buttons";
  for (const label of ["success", "failure"] as const) {
    const button = document.createElement("button");
    button.textContent = label === "success" ? "success (s)" : "failure (f)";
    button.className = `btn btn-${label}`;
    button.addEventListener("click", () => callbacks.onLabel(item, label));
    buttons.appendChild(button);
  }
  card.appendChild(buttons);
  return card;
}

export function renderAnnotateView(
  root: HTMLElement,
  api: ApiClient,
  state: AppState,
  callbacks: AnnotateCallbacks,
): void {
  root.replaceChildren();
  if (!state.page || state.page.items.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No scored candidates found. Run the pipeline's postfilter stage first.";
    root.appendChild(empty);
    return;
  }

  const header = document.createElement("div");
  header.className = "pager";
  const position = document.createElement("span");
  const first = state.page.offset + 1;
  const last = state.page.offset + state.page.items.length;
  position.textContent = `candidates ${first}-${last} of ${state.page.total}`;
  const previous = document.createElement("button");
  previous.textContent = "← page";
  previous.disabled = state.page.offset === 0;
  previous.addEventListener("click", () => callbacks.onPage(-1));
  const next = document.createElement("button");
  next.textContent = "page →";
  next.disabled = last >= state.page.total;
  next.addEventListener("click", () => callbacks.onPage(1));
  header.append(previous, position, next);
  root.appendChild(header);

  const grid = document.createElement("div");
  grid.className = "grid";
  state.page.items.forEach((item, index) => {
    grid.appendChild(renderPair(api, state, item, index, index === state.cursor, callbacks));
  });
  root.appendChild(grid);

  const hint = document.createElement("p");
  hint.className = "hint";
  hint.textContent = "keys: s = success, f = failure, arrows = move";
  root.appendChild(hint);

  const selected = currentItem(state);
  if (selected) {
    const element = grid.querySelector(`[data-index="${state.cursor}"]`);
    element?.scrollIntoView({ block: "nearest" });
  }
}
