// Typed client for the calibration service. All numbers shown in the UI come
// from these payloads verbatim; the client never computes metrics.

export interface CandidateItem {
  pair_id: string;
  candidate_index: number;
  image_ref: string;
  original_ref: string;
  mask_ref: string;
  object_label: string;
  scores: Record<string, number | null>;
  effective_label: string | null;
  my_label: string | null;
}

export interface CandidatesPage {
  total: number;
  offset: number;
  items: CandidateItem[];
}

export interface SweepPointDto {
  threshold: number;
  filtered_pct: number;
  success_pct_retained: number | null;
}

export interface SweepResponse {
  filter: string;
  orientation?: string;
  points: SweepPointDto[];
  annotation_count: number;
  last_seq: number;
}

export interface SuggestResponse {
  filter: string;
  threshold: number;
  no_plateau: boolean;
}

export interface MetaResponse {
  candidate_count: number;
  annotation_count: number;
  last_seq: number;
  filters: string[];
}

export interface AnnotationBody {
  pair_id: string;
  candidate_index: number;
  label: "success" | "failure";
  annotator_id: string;
}

export interface HttpResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<HttpResponse>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...(args as [string])),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: { method: string; headers: Record<string, string>; body?: string } = {
      method,
      headers: { "Content-Type": "application/json" },
    };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, `${method} ${path} -> HTTP ${response.status}`);
    }
    return (await response.json()) as T;
  }

  meta(): Promise<MetaResponse> {
    return this.request("GET", "/api/meta");
  }

  candidates(offset: number, limit: number, annotatorId: string): Promise<CandidatesPage> {
    const query = `offset=${offset}&limit=${limit}&annotator_id=${encodeURIComponent(annotatorId)}`;
    return this.request("GET", `/api/candidates?${query}`);
  }

  postAnnotation(body: AnnotationBody): Promise<unknown> {
    return this.request("POST", "/api/annotations", body);
  }

  sweep(filter: string): Promise<SweepResponse> {
    return this.request("GET", `/api/sweep?filter=${encodeURIComponent(filter)}`);
  }

  suggest(filter: string, epsilon: number): Promise<SuggestResponse> {
    return this.request("GET", `/api/suggest?filter=${encodeURIComponent(filter)}&epsilon=${epsilon}`);
  }

  applyThresholds(suggestions: Record<string, number>): Promise<{ fragment: unknown; config: unknown }> {
    return this.request("PUT", "/api/thresholds", { suggestions });
  }

  imageUrl(ref: string): string {
    return `${this.baseUrl}/api/images/${ref}`;
  }
}
