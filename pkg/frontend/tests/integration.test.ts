// End-to-end flow against the real calibration service on a fixture workspace:
// label 10 candidates (log replay check), verify the sweep chart matches the
// service table, and apply a threshold twice (idempotent config round trip).

import { execFileSync, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, CandidatesPage, SweepResponse } from "../src/api.js";
import { chartModel } from "../src/chart.js";
import { WriteQueue } from "../src/queue.js";

const PORT = 8793;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let workspaceDir = "";
const api = new ApiClient(BASE);

async function waitForServer(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      await api.meta();
      return;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 300));
    }
  }
  throw new Error("calibration service did not come up");
}

beforeAll(async () => {
  const root = mkdtempSync(join(tmpdir(), "calib-ui-"));
  workspaceDir = execFileSync("python3", [join(__dirname, "..", "scripts", "make_fixture.py"), root], {
    encoding: "utf8",
  }).trim();
  server = spawn("pipe", ["--workspace", workspaceDir, "serve-calibration", "--port", String(PORT)], {
    stdio: "ignore",
  });
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill();
});

describe("calibration UI against the fixture service", () => {
  it("labeling 10 candidates persists 10 annotations (log replay check)", async () => {
    const page: CandidatesPage = await api.candidates(0, 10, "ui");
    expect(page.items.length).toBe(10);

    const queue = new WriteQueue((body) => api.postAnnotation(body), 100);
    const acked: string[] = [];
    queue.onAck = (body) => acked.push(`${body.pair_id}#${body.candidate_index}`);
    page.items.forEach((item, index) => {
      queue.enqueue({
        pair_id: item.pair_id,
        candidate_index: item.candidate_index,
        label: index % 2 === 0 ? "success" : "failure",
        annotator_id: "ui",
      });
    });
    await queue.flush();
    expect(queue.pending).toBe(0);
    expect(acked.length).toBe(10);

    // replay the append-only log independently of the service
    const logLines = readFileSync(join(workspaceDir, "annotations.log"), "utf8")
      .trim()
      .split("\n")
      .map((line) => JSON.parse(line) as { pair_id: string; candidate_index: number; label: string });
    expect(logLines.length).toBe(10);
    const replayed = new Map<string, string>();
    for (const row of logLines) {
      replayed.set(`${row.pair_id}#${row.candidate_index}`, row.label);
    }
    expect(replayed.size).toBe(10);
    const meta = await api.meta();
    expect(meta.annotation_count).toBe(10);
    expect(meta.last_seq).toBe(10);

    // server-acknowledged labels come back on reload
    const reloaded = await api.candidates(0, 10, "ui");
    reloaded.items.forEach((item, index) => {
      expect(item.my_label).toBe(index % 2 === 0 ? "success" : "failure");
    });
  }, 30_000);

  it("sweep chart renders the service table verbatim", async () => {
    const sweep: SweepResponse = await api.sweep("consensus");
    expect(sweep.annotation_count).toBe(10);
    expect(sweep.points.length).toBeGreaterThanOrEqual(3);

    const model = chartModel(sweep.points, null);
    const tableByThreshold = new Map(sweep.points.map((p) => [p.threshold, p]));
    expect(model.points.length).toBe(
      sweep.points.filter((p) => p.success_pct_retained !== null).length,
    );
    for (const point of model.points) {
      const row = tableByThreshold.get(point.threshold);
      expect(row).toBeDefined();
      expect(point.filteredPct).toBe(row!.filtered_pct);
      expect(point.successPct).toBe(row!.success_pct_retained);
    }
    // drawing order follows filtered_pct, values untouched (no smoothing)
    const drawn = model.points.map((p) => p.filteredPct);
    expect(drawn).toEqual([...drawn].sort((a, b) => a - b));
  }, 30_000);

  it("applying a threshold round-trips into the pipeline config idempotently", async () => {
    const sweep = await api.sweep("consensus");
    const threshold = sweep.points[Math.floor(sweep.points.length / 2)].threshold;

    const first = await api.applyThresholds({ consensus: threshold });
    const configAfterFirst = readFileSync(join(workspaceDir, "config.yaml"), "utf8");
    const second = await api.applyThresholds({ consensus: threshold });
    const configAfterSecond = readFileSync(join(workspaceDir, "config.yaml"), "utf8");

    expect(configAfterSecond).toBe(configAfterFirst);
    expect(second.config).toEqual(first.config);
    expect(configAfterFirst).toContain("consensus_threshold");
    const fragment = first.fragment as { post_removal: { consensus_threshold: number } };
    expect(fragment.post_removal.consensus_threshold).toBe(threshold);
  }, 30_000);
});
