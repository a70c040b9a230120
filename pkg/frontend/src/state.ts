// Pure state model: everything rendered derives from server responses plus
// the in-flight write queue, so reloading the page reproduces the same view.

import { CandidatesPage, SweepResponse, SuggestResponse } from "./api.js";

export type Label = "success" | "failure";

export interface LabelMark {
  label: Label;
  status: "pending" | "acked";
}

export interface AppState {
  page: CandidatesPage | null;
  cursor: number;
  marks: Record<string, LabelMark>;
  sweep: SweepResponse | null;
  suggestion: SuggestResponse | null;
  filter: string;
  queue: { pending: number; offline: boolean };
}

export function initialState(filter = "consensus"): AppState {
  return {
    page: null,
    cursor: 0,
    marks: {},
    sweep: null,
    suggestion: null,
    filter,
    queue: { pending: 0, offline: false },
  };
}

export function candidateKey(pairId: string, candidateIndex: number): string {
  return `${pairId}#${candidateIndex}`;
}

export function withPage(state: AppState, page: CandidatesPage): AppState {
  // server state is authoritative: seed marks from my_label, keep newer local
  // pending marks (they are still in the queue)
  const marks: Record<string, LabelMark> = {};
  for (const item of page.items) {
    if (item.my_label === "success" || item.my_label === "failure") {
      marks[candidateKey(item.pair_id, item.candidate_index)] = { label: item.my_label, status: "acked" };
    }
  }
  for (const [key, mark] of Object.entries(state.marks)) {
    if (mark.status === "pending") {
      marks[key] = mark;
    }
  }
  const cursor = Math.min(state.cursor, Math.max(page.items.length - 1, 0));
  return { ...state, page, marks, cursor };
}

export function withLocalLabel(state: AppState, key: string, label: Label): AppState {
  return { ...state, marks: { ...state.marks, [key]: { label, status: "pending" } } };
}

export function withAck(state: AppState, key: string): AppState {
  const mark = state.marks[key];
  if (!mark) return state;
  return { ...state, marks: { ...state.marks, [key]: { ...mark, status: "acked" } } };
}

export function withCursor(state: AppState, delta: number): AppState {
  if (!state.page) return state;
  const upper = Math.max(state.page.items.length - 1, 0);
  const cursor = Math.min(Math.max(state.cursor + delta, 0), upper);
  return { ...state, cursor };
}

export function withSweep(state: AppState, sweep: SweepResponse, suggestion: SuggestResponse | null): AppState {
  // ignore responses older than what is already displayed (stale-curve race)
  if (state.sweep && sweep.last_seq < state.sweep.last_seq) {
    return state;
  }
  return { ...state, sweep, suggestion };
}

export function withQueue(state: AppState, queue: { pending: number; offline: boolean }): AppState {
  return { ...state, queue };
}

export function currentItem(state: AppState) {
  if (!state.page || state.page.items.length === 0) return null;
  return state.page.items[state.cursor];
}

export function labeledCount(state: AppState): number {
  return Object.keys(state.marks).length;
}
