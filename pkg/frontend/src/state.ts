/** Client state: language, query, paging, in-flight bookkeeping, badge cache.
 *
 * Each endpoint has a monotonically increasing request token; a response is
 * applied only when its token is still the newest for that endpoint, so a
 * superseded search can never overwrite a fresher one. Factcheck results are
 * cached per article for the session, keyed by article id.
 */

import type { Lang } from "./i18n.js";

export type Endpoint = "events" | "search" | "factcheck";

export interface Badge {
  state: "pending" | "scored" | "unavailable";
  score?: number;
  label?: "credible" | "doubtful";
}

export interface UiState {
  language: Lang;
  query: string;
  page: number;
  pending: Record<Endpoint, boolean>;
}

export class AppStore {
  state: UiState = {
    language: "en",
    query: "",
    page: 1,
    pending: { events: false, search: false, factcheck: false },
  };

  readonly badges = new Map<string, Badge>();

  private sequence: Record<Endpoint, number> = { events: 0, search: 0, factcheck: 0 };

  /** Mark an endpoint in flight and hand back the token that must win. */
  begin(endpoint: Endpoint): number {
    this.sequence[endpoint] += 1;
    this.state.pending[endpoint] = true;
    return this.sequence[endpoint];
  }

  /** True when the response for `token` is still current and may be applied. */
  settle(endpoint: Endpoint, token: number): boolean {
    if (token !== this.sequence[endpoint]) {
      return false; // superseded by a newer request: discard
    }
    this.state.pending[endpoint] = false;
    return true;
  }

  inFlight(endpoint: Endpoint): boolean {
    return this.state.pending[endpoint];
  }

  toggleLanguage(): Lang {
    this.state.language = this.state.language === "en" ? "zh" : "en";
    return this.state.language;
  }
}
