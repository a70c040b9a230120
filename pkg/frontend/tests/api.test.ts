import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, FetchLike, HttpResponse } from "../src/api.js";

function fakeResponse(status: number, payload: unknown): HttpResponse {
  return { ok: status >= 200 && status < 300, status, json: async () => payload };
}

function recordingFetch(status: number, payload: unknown) {
  const calls: { url: string; init?: { method?: string; body?: string } }[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    calls.push({ url, init });
    return fakeResponse(status, payload);
  };
  return { calls, fetchImpl };
}

describe("ApiClient", () => {
  it("requests candidates with paging params", async () => {
    const { calls, fetchImpl } = recordingFetch(200, { total: 0, offset: 0, items: [] });
    const api = new ApiClient("", fetchImpl);
    const page = await api.candidates(24, 12, "me");
    expect(page.items).toEqual([]);
    expect(calls[0].url).toBe("/api/candidates?offset=24&limit=12&annotator_id=me");
    expect(calls[0].init?.method).toBe("GET");
  });

  it("posts annotations as JSON", async () => {
    const { calls, fetchImpl } = recordingFetch(200, { created_seq: 1 });
    const api = new ApiClient("", fetchImpl);
    await api.postAnnotation({ pair_id: "p", candidate_index: 2, label: "success", annotator_id: "me" });
    expect(calls[0].url).toBe("/api/annotations");
    expect(JSON.parse(calls[0].init!.body!)).toEqual({
      pair_id: "p",
      candidate_index: 2,
      label: "success",
      annotator_id: "me",
    });
  });

  it("puts threshold suggestions", async () => {
    const { calls, fetchImpl } = recordingFetch(200, { fragment: {}, config: {} });
    const api = new ApiClient("", fetchImpl);
    await api.applyThresholds({ consensus: 0.05 });
    expect(calls[0].url).toBe("/api/thresholds");
    expect(calls[0].init?.method).toBe("PUT");
    expect(JSON.parse(calls[0].init!.body!)).toEqual({ suggestions: { consensus: 0.05 } });
  });

  it("raises ApiError with status on non-2xx", async () => {
    const { fetchImpl } = recordingFetch(400, { detail: "bad" });
    const api = new ApiClient("", fetchImpl);
    await expect(api.sweep("consensus")).rejects.toMatchObject({ status: 400 });
    await expect(api.sweep("consensus")).rejects.toBeInstanceOf(ApiError);
  });

  it("builds image URLs from refs", () => {
    const api = new ApiClient("http://host:1");
    expect(api.imageUrl("blobs/ab/abc.png")).toBe("http://host:1/api/images/blobs/ab/abc.png");
  });
});
