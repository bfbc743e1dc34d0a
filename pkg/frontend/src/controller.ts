/** View controller: owns the last API payloads and turns them into HTML.
 *
 * Every mutation returns the new markup (or null when the triggering
 * response arrived stale), so the DOM layer is a dumb innerHTML sink and
 * the whole flow is testable without a browser.
 */

import { ApiClient, ApiError } from "./api.js";
import { renderBoard, renderError, renderSearchBoard } from "./board.js";
import { t } from "./i18n.js";
import { AppStore } from "./state.js";
import type { BoardArticle, EventRow, SearchGroup } from "./types.js";

export class Dashboard {
  private events: EventRow[] = [];
  private searchGroups: SearchGroup[] | null = null;
  banner = "";

  constructor(
    readonly store: AppStore,
    private readonly client: ApiClient,
  ) {}

  /** Current view: search results when a query is active, else the board. */
  render(): string {
    const body = this.searchGroups === null
      ? renderBoard(this.events, this.store.state, this.store.badges)
      : renderSearchBoard(this.searchGroups, this.store.state, this.store.badges);
    return this.banner + body;
  }

  async loadEvents(page = 1): Promise<string | null> {
    const token = this.store.begin("events");
    try {
      const response = await this.client.getEvents(page);
      if (!this.store.settle("events", token)) {
        return null;
      }
      this.events = response.events;
      this.store.state.page = response.page;
      this.banner = "";
    } catch (error) {
      if (!this.store.settle("events", token)) {
        return null;
      }
      this.banner = this.describe(error);
    }
    return this.render();
  }

  /** Search flow; the UI never submits an empty query, but guard anyway. */
  async runSearch(query: string): Promise<string | null> {
    if (query.trim() === "") {
      return this.clearSearch();
    }
    this.store.state.query = query;
    const token = this.store.begin("search");
    try {
      const response = await this.client.search(query);
      if (!this.store.settle("search", token)) {
        return null; // a newer query superseded this response
      }
      this.searchGroups = response.groups;
      this.banner = "";
    } catch (error) {
      if (!this.store.settle("search", token)) {
        return null;
      }
      this.banner = this.describe(error);
    }
    return this.render();
  }

  clearSearch(): string {
    this.store.state.query = "";
    this.searchGroups = null;
    return this.render();
  }

  /** Language toggle is presentation-only: re-render cached data, no fetch. */
  toggleLanguage(): string {
    this.store.toggleLanguage();
    return this.render();
  }

  /** Fetch (or reuse) the credibility badge for one article card. */
  async requestBadge(article: Pick<BoardArticle, "article_id" | "pivot_title" | "original_title">):
      Promise<string> {
    const cached = this.store.badges.get(article.article_id);
    if (cached !== undefined && cached.state !== "pending") {
      return this.render(); // session cache: no second request
    }
    this.store.badges.set(article.article_id, { state: "pending" });
    const text = article.pivot_title ?? article.original_title;
    try {
      const verdict = await this.client.factcheck(text);
      this.store.badges.set(article.article_id, {
        state: "scored",
        score: verdict.score,
        label: verdict.label,
      });
    } catch (error) {
      if (error instanceof ApiError && error.status === 503) {
        this.store.badges.set(article.article_id, { state: "unavailable" });
      } else {
        this.store.badges.delete(article.article_id);
        this.banner = this.describe(error);
      }
    }
    return this.render();
  }

  findArticle(articleId: string): BoardArticle | undefined {
    const pools: BoardArticle[][] = [];
    for (const event of this.events) {
      for (const column of event.sources) {
        pools.push(column.articles);
      }
    }
    for (const group of this.searchGroups ?? []) {
      pools.push(group.articles);
    }
    for (const pool of pools) {
      const hit = pool.find((a) => a.article_id === articleId);
      if (hit !== undefined) {
        return hit;
      }
    }
    return undefined;
  }

  private describe(error: unknown): string {
    const message = error instanceof Error ? error.message : String(error);
    return renderError(message, this.store.state.language);
  }
}

export function appTitle(dashboard: Dashboard): string {
  return t(dashboard.store.state.language, "app_title");
}
