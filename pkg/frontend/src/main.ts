// Bootstrap: wires the API client, write queue, and the two views together.

import { ApiClient, CandidateItem } from "./api.js";
import { renderAnnotateView } from "./annotate.js";
import { actionForKey } from "./keyboard.js";
import { WriteQueue } from "./queue.js";
import {
  AppState,
  candidateKey,
  currentItem,
  initialState,
  withAck,
  withCursor,
  withLocalLabel,
  withPage,
  withQueue,
  withSweep,
} from "./state.js";
import { renderSweepView } from "./sweep.js";

const PAGE_SIZE = 12;
const ANNOTATOR_ID = "ui";

type Tab = "annotate" | "sweep";

class App {
  private state: AppState = initialState();
  private tab: Tab = "annotate";
  private offset = 0;
  private filters: string[] = ["consensus", "mm_clip", "importance"];
  private sliderIndex = 0;
  private lastApplied: string | null = null;
  private readonly api = new ApiClient("");
  private readonly queue: WriteQueue;

  constructor(private readonly root: HTMLElement) {
    this.queue = new WriteQueue((body) => this.api.postAnnotation(body));
    this.queue.onChange = (snapshot) => {
      this.state = withQueue(this.state, snapshot);
      this.render();
    };
    this.queue.onAck = (body) => {
      this.state = withAck(this.state, candidateKey(body.pair_id, body.candidate_index));
      // the curve depends on annotations: refresh it after every ack
      void this.refreshSweep();
      this.render();
    };
    document.addEventListener("keydown", (event) => this.onKey(event));
  }

  async start(): Promise<void> {
    try {
      const meta = await this.api.meta();
      this.filters = meta.filters.filter((f) => f !== "abnormality");
    } catch {
      // fall back to the default filter list; the banner will show offline
    }
    await this.loadPage();
    await this.refreshSweep();
    this.render();
  }

  private async loadPage(): Promise<void> {
    try {
      const page = await this.api.candidates(this.offset, PAGE_SIZE, ANNOTATOR_ID);
      this.state = withPage(this.state, page);
    } catch {
      this.state = withQueue(this.state, { ...this.state.queue, offline: true });
    }
    this.render();
  }

  private async refreshSweep(): Promise<void> {
    try {
      const sweep = await this.api.sweep(this.state.filter);
      let suggestion = null;
      if (sweep.annotation_count > 0 && sweep.points.length >= 3) {
        try {
          suggestion = await this.api.suggest(this.state.filter, 0.05);
        } catch {
          suggestion = null;
        }
      }
      this.state = withSweep(this.state, sweep, suggestion);
    } catch {
      // sweep stays as-is; banner state comes from the queue
    }
    this.render();
  }

  private label(item: CandidateItem, label: "success" | "failure"): void {
    const key = candidateKey(item.pair_id, item.candidate_index);
    this.state = withLocalLabel(this.state, key, label);
    this.queue.enqueue({
      pair_id: item.pair_id,
      candidate_index: item.candidate_index,
      label,
      annotator_id: ANNOTATOR_ID,
    });
    this.state = withCursor(this.state, 1);
    this.render();
  }

  private onKey(event: KeyboardEvent): void {
    if (this.tab !== "annotate") return;
    if (event.target instanceof HTMLInputElement || event.target instanceof HTMLSelectElement) return;
    const action = actionForKey(event.key);
    if (!action) return;
    event.preventDefault();
    if (action.kind === "move") {
      this.state = withCursor(this.state, action.delta);
      this.render();
      return;
    }
    const item = currentItem(this.state);
    if (item) this.label(item, action.label);
  }

  private async applyThreshold(filter: string, threshold: number): Promise<void> {
    try {
      const result = await this.api.applyThresholds({ [filter]: threshold });
      this.lastApplied = `merged config fragment:\n${JSON.stringify(result.fragment, null, 2)}`;
    } catch (error) {
      this.lastApplied = `apply failed: ${String(error)}`;
    }
    this.render();
  }

  private render(): void {
    this.root.replaceChildren();

    const banner = document.createElement("div");
    banner.className = this.state.queue.offline ? "banner banner-offline" : "banner";
    banner.textContent = this.state.queue.offline
      ? `server unreachable — ${this.state.queue.pending} write(s) queued, retrying...`
      : this.state.queue.pending > 0
        ? `${this.state.queue.pending} write(s) in flight`
        : "connected";
    this.root.appendChild(banner);

    const tabs = document.createElement("nav");
    tabs.className = "tabs";
    for (const tab of ["annotate", "sweep"] as const) {
      const button = document.createElement("button");
      button.textContent = tab;
      button.className = tab === this.tab ? "tab active" : "tab";
      button.addEventListener("click", () => {
        this.tab = tab;
        if (tab === "sweep") void this.refreshSweep();
        this.render();
      });
      tabs.appendChild(button);
    }
    this.root.appendChild(tabs);

    const view = document.createElement("main");
    this.root.appendChild(view);

    if (this.tab === "annotate") {
      renderAnnotateView(view, this.api, this.state, {
        onLabel: (item, label) => this.label(item, label),
        onMove: (delta) => {
          this.state = withCursor(this.state, delta);
          this.render();
        },
        onPage: (delta) => {
          this.offset = Math.max(0, this.offset + delta * PAGE_SIZE);
          void this.loadPage();
        },
      });
    } else {
      renderSweepView(
        view,
        this.state,
        this.filters,
        this.sliderIndex,
        (index) => {
          this.sliderIndex = index;
          this.render();
        },
        {
          onFilterChange: (filter) => {
            this.state = { ...this.state, filter, sweep: null, suggestion: null };
            this.sliderIndex = 0;
            void this.refreshSweep();
          },
          onApply: (filter, threshold) => void this.applyThreshold(filter, threshold),
        },
        this.lastApplied,
      );
    }
  }
}

const rootElement = document.getElementById("app");
if (rootElement) {
  void new App(rootElement).start();
}
