// Thin typed client over the service's JSON endpoints. The fetch
// implementation is injectable so tests can run without a browser.

import type {
  AggregateRow,
  ExplanationFilter,
  ExplanationPage,
  ExplanationSummary,
  Rating,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.status = status;
    this.detail = detail;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(response: Response): Promise<Response> {
  if (response.ok) return response;
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") detail = body.detail;
    else if (body) detail = JSON.stringify(body.detail ?? body);
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    // bind: browsers refuse fetch called without its global receiver
    this.fetchImpl = fetchImpl ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async getJson<T>(path: string, params?: Record<string, string>): Promise<T> {
    const query = params && Object.keys(params).length ? `?${new URLSearchParams(params)}` : "";
    const response = await this.fetchImpl(`${this.baseUrl}${path}${query}`);
    return (await raiseForStatus(response)).json() as Promise<T>;
  }

  async listExplanations(
    filter: ExplanationFilter = {},
    limit = 100,
    offset = 0,
  ): Promise<ExplanationPage> {
    const params: Record<string, string> = { limit: String(limit), offset: String(offset) };
    if (filter.method) params.method = filter.method;
    if (filter.subjectKind) params.subjectKind = filter.subjectKind;
    if (filter.component) params.component = filter.component;
    return this.getJson<ExplanationPage>("/explanations", params);
  }

  /** Follows pagination until every matching explanation is collected. */
  async listAllExplanations(filter: ExplanationFilter = {}): Promise<ExplanationSummary[]> {
    const items: ExplanationSummary[] = [];
    const pageSize = 100;
    for (;;) {
      const page = await this.listExplanations(filter, pageSize, items.length);
      items.push(...page.items);
      if (items.length >= page.total || page.items.length === 0) return items;
    }
  }

  async getExplanation(id: string): Promise<ExplanationSummary> {
    return this.getJson<ExplanationSummary>(`/explanations/${id}`);
  }

  async listRatings(filter: { explanationId?: string; raterId?: string } = {}): Promise<Rating[]> {
    const params: Record<string, string> = {};
    if (filter.explanationId) params.explanationId = filter.explanationId;
    if (filter.raterId) params.raterId = filter.raterId;
    return this.getJson<Rating[]>("/ratings", params);
  }

  async submitRating(
    raterId: string,
    rating: { explanationId: string; metric: string; value: number },
  ): Promise<Rating> {
    const response = await this.fetchImpl(`${this.baseUrl}/ratings`, {
      method: "POST",
      headers: { "Content-Type": "application/json", "X-Rater-Id": raterId },
      body: JSON.stringify(rating),
    });
    return (await raiseForStatus(response)).json() as Promise<Rating>;
  }

  async aggregate(): Promise<AggregateRow[]> {
    return this.getJson<AggregateRow[]>("/ratings/aggregate");
  }

  async exportCsv(): Promise<string> {
    const response = await this.fetchImpl(`${this.baseUrl}/ratings/export`);
    return (await raiseForStatus(response)).text();
  }
}
