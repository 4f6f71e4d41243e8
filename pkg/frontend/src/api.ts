// Typed client over the service's JSON API.  Identical in-flight requests
// are deduplicated by (method, path, body) so double-clicks and concurrent
// view refreshes share one round trip.

import type {
  ErrorBody,
  EvaluateRequest,
  HangarProfile,
  IngestCounts,
  Recommendation,
  Snapshot,
  TimelinePoint,
} from "./types.js";

export class ApiRequestError extends Error {
  readonly status: number;
  readonly kind: string;
  readonly field?: string;
  readonly missing?: string[];

  constructor(status: number, body: ErrorBody | null, fallback: string) {
    super(body?.error?.message ?? fallback);
    this.status = status;
    this.kind = body?.error?.kind ?? "Unknown";
    this.field = body?.error?.field;
    this.missing = body?.error?.missing;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;
  private readonly inFlight = new Map<string, Promise<unknown>>();

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private request<T>(method: string, path: string, body?: string, contentType?: string): Promise<T> {
    const key = `${method} ${path} ${body ?? ""}`;
    const pending = this.inFlight.get(key);
    if (pending) {
      return pending as Promise<T>;
    }
    const run = (async () => {
      const init: RequestInit = { method };
      if (body !== undefined) {
        init.body = body;
        init.headers = { "Content-Type": contentType ?? "application/json" };
      }
      const response = await this.fetchImpl(`${this.base}${path}`, init);
      const text = await response.text();
      if (!response.ok) {
        let parsed: ErrorBody | null = null;
        try {
          parsed = JSON.parse(text) as ErrorBody;
        } catch {
          parsed = null;
        }
        throw new ApiRequestError(response.status, parsed, `${method} ${path} -> ${response.status}`);
      }
      return JSON.parse(text) as T;
    })();
    this.inFlight.set(key, run);
    return (run as Promise<T>).finally(() => {
      this.inFlight.delete(key);
    });
  }

  health(): Promise<{ status: string; tree_fingerprint: string }> {
    return this.request("GET", "/health");
  }

  putProfile(profile: HangarProfile): Promise<{ version: number }> {
    return this.request("PUT", "/hangar/profile", JSON.stringify(profile));
  }

  getProfile(): Promise<{ version: number; profile: HangarProfile }> {
    return this.request("GET", "/hangar/profile");
  }

  ingestSeries(csv: string): Promise<IngestCounts> {
    return this.request("POST", "/ingest/series", csv, "text/csv");
  }

  ingestPollution(csv: string): Promise<IngestCounts> {
    return this.request("POST", "/ingest/pollution", csv, "text/csv");
  }

  ingestMetar(lines: string, month?: string): Promise<IngestCounts> {
    const query = month ? `?month=${encodeURIComponent(month)}` : "";
    return this.request("POST", `/ingest/metar${query}`, lines, "text/plain");
  }

  evaluate(body: EvaluateRequest): Promise<Snapshot> {
    return this.request("POST", "/evaluate", JSON.stringify(body));
  }

  timeline(from?: string, to?: string): Promise<{ points: TimelinePoint[] }> {
    const params = new URLSearchParams();
    if (from) params.set("from", from);
    if (to) params.set("to", to);
    const query = params.toString();
    return this.request("GET", `/risk/timeline${query ? `?${query}` : ""}`);
  }

  recommendations(): Promise<Recommendation> {
    return this.request("GET", "/recommendations");
  }
}
