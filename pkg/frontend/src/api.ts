/** Thin typed client for the finfact API.
 *
 * The fetch implementation is injectable so tests can serve fixtures and
 * count requests; every non-2xx body is surfaced as an ApiError carrying
 * the server's {status, code, message} envelope.
 */

import type {
  ErrorBody,
  EventsResponse,
  FactcheckResponse,
  HealthResponse,
  SearchResponse,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  getEvents(page = 1, pageSize = 20): Promise<EventsResponse> {
    return this.request(`/api/events?page=${page}&page_size=${pageSize}`);
  }

  search(query: string, limit = 50): Promise<SearchResponse> {
    return this.request(`/api/search?q=${encodeURIComponent(query)}&limit=${limit}`);
  }

  factcheck(text: string): Promise<FactcheckResponse> {
    return this.request("/api/factcheck", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  health(): Promise<HealthResponse> {
    return this.request("/api/health");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let body: Partial<ErrorBody> = {};
      try {
        body = (await response.json()) as Partial<ErrorBody>;
      } catch {
        // non-JSON error body: keep the HTTP status as the message
      }
      throw new ApiError(
        body.status ?? response.status,
        body.code ?? "http_error",
        body.message ?? `request failed with status ${response.status}`,
      );
    }
    return (await response.json()) as T;
  }
}
