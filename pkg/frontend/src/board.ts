/** Pure render-to-string views.
 *
 * Everything displayed is read straight off API responses: rows keep the
 * served event order, columns are the sorted union of source names, and no
 * score or ranking is computed client side. Pure string output keeps the
 * views deterministic and snapshot-testable.
 */

import { t, type Lang } from "./i18n.js";
import type { Badge, UiState } from "./state.js";
import type { BoardArticle, EventRow, SearchGroup } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Title in the selected language, mirroring the server's display rule:
 * "zh" surfaces the original-language title, "en" the pivot translation. */
export function displayTitle(article: Pick<BoardArticle, "original_title" | "pivot_title" | "title">,
                             lang: Lang): string {
  if (lang === "zh") {
    return article.original_title;
  }
  return article.pivot_title ?? article.title;
}

/** Sorted union of the source names present in the given rows. */
export function boardColumns(rows: { sources: { source: string }[] }[]): string[] {
  const names = new Set<string>();
  for (const row of rows) {
    for (const column of row.sources) {
      names.add(column.source);
    }
  }
  return [...names].sort();
}

export function renderBadge(badge: Badge | undefined, lang: Lang): string {
  if (badge === undefined) {
    return `<button class="badge badge-check" data-action="factcheck">${t(lang, "check")}</button>`;
  }
  if (badge.state === "pending") {
    return `<span class="badge badge-pending">${t(lang, "checking")}</span>`;
  }
  if (badge.state === "unavailable") {
    return `<span class="badge badge-unavailable">${t(lang, "model_unavailable")}</span>`;
  }
  const style = badge.label === "credible" ? "badge-credible" : "badge-doubtful";
  const wording = t(lang, badge.label === "credible" ? "credible" : "doubtful");
  return `<span class="badge ${style}">${wording} ${badge.score!.toFixed(2)}</span>`;
}

export function renderCard(article: BoardArticle, lang: Lang,
                           badges: Map<string, Badge>): string {
  const title = escapeHtml(displayTitle(article, lang));
  const heading = article.url === null
    ? `<span class="card-title">${title}</span>`
    : `<a class="card-title" href="${escapeHtml(article.url)}" rel="noopener">${title}</a>`;
  return [
    `<article class="card" data-article-id="${escapeHtml(article.article_id)}">`,
    heading,
    `<time datetime="${escapeHtml(article.published_at)}">${escapeHtml(article.published_at)}</time>`,
    renderBadge(badges.get(article.article_id), lang),
    `</article>`,
  ].join("");
}

function renderGrid(rows: { event_id: number; hashtags: string[]; cells: Map<string, BoardArticle[]> }[],
                    columns: string[], lang: Lang, badges: Map<string, Badge>): string {
  const head = [`<th class="corner">${t(lang, "event")}</th>`]
    .concat(columns.map((name) => `<th scope="col">${escapeHtml(name)}</th>`))
    .join("");
  const body = rows
    .map((row) => {
      const tags = row.hashtags.map((tag) => `<span class="tag">#${escapeHtml(tag)}</span>`).join(" ");
      const cells = columns
        .map((name) => {
          const articles = row.cells.get(name) ?? [];
          const cards = articles.map((a) => renderCard(a, lang, badges)).join("");
          return `<td>${cards}</td>`;
        })
        .join("");
      return `<tr data-event-id="${row.event_id}"><th scope="row">${tags}</th>${cells}</tr>`;
    })
    .join("");
  return `<table class="board"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

/** The event board: one row per event (served order), one column per source. */
export function renderBoard(events: EventRow[], state: UiState,
                            badges: Map<string, Badge>): string {
  if (events.length === 0) {
    return `<p class="empty">${t(state.language, "empty_board")}</p>`;
  }
  const rows = events.map((event) => ({
    event_id: event.event_id,
    hashtags: event.hashtags,
    cells: new Map(event.sources.map((column) => [column.source, column.articles])),
  }));
  return renderGrid(rows, boardColumns(events), state.language, badges);
}

/** Search results in the same grid, restricted to the returned groups and
 * keeping the API's group order. */
export function renderSearchBoard(groups: SearchGroup[], state: UiState,
                                  badges: Map<string, Badge>): string {
  if (groups.length === 0) {
    return `<p class="empty">${t(state.language, "empty_search")}</p>`;
  }
  const rows = groups.map((group) => {
    const cells = new Map<string, BoardArticle[]>();
    for (const article of group.articles) {
      const bucket = cells.get(article.source);
      if (bucket === undefined) {
        cells.set(article.source, [article]);
      } else {
        bucket.push(article);
      }
    }
    return { event_id: group.event_id, hashtags: group.hashtags, cells };
  });
  const columns = boardColumns(rows.map((row) => ({
    sources: [...row.cells.keys()].map((source) => ({ source })),
  })));
  return renderGrid(rows, columns, state.language, badges);
}

/** Error banner; the board below it is left untouched by the caller. */
export function renderError(message: string, lang: Lang): string {
  return `<div class="banner error" role="alert">${t(lang, "error_prefix")}: ${escapeHtml(message)}</div>`;
}
