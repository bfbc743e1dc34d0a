/** Canned API payloads for the tests, shaped exactly like the server's JSON.
 *
 * The board fixture is a miniature of the real thing: one event covered in
 * both languages by two sources, plus a single-source event so the grid has
 * an empty cell to render.
 */

import { readFileSync } from "node:fs";

import type { FetchLike } from "../src/api.js";
import type {
  BoardArticle,
  EventsResponse,
  FactcheckResponse,
  SearchResponse,
} from "../src/types.js";

function loadJson<T>(name: string): T {
  const path = new URL(`fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(path, "utf-8")) as T;
}

/** The full 100-article bilingual board as the live server returned it:
 * ten events, each covered by seven English and three Chinese sources. */
export function corpusEventsPayload(): EventsResponse {
  return loadJson<EventsResponse>("events.json");
}

/** The live server's response to `#fed rates` over the same corpus. */
export function corpusSearchPayload(): SearchResponse {
  return loadJson<SearchResponse>("search.json");
}

export function fedEnReuters(): BoardArticle {
  return {
    article_id: "art-en-1",
    language: "en",
    title: "Fed holds rates steady",
    original_title: "Fed holds rates steady",
    pivot_title: null,
    published_at: "2026-03-02T09:00:00+00:00",
    url: "https://example.com/fed-en",
  };
}

export function fedZhCaixin(): BoardArticle {
  return {
    article_id: "art-zh-1",
    language: "zh",
    title: "Fed keeps interest rates unchanged",
    original_title: "美联储维持利率不变",
    pivot_title: "Fed keeps interest rates unchanged",
    published_at: "2026-03-02T10:30:00+00:00",
    url: null,
  };
}

export function oilEnReuters(): BoardArticle {
  return {
    article_id: "art-en-2",
    language: "en",
    title: "Brent crude slides on supply data",
    original_title: "Brent crude slides on supply data",
    pivot_title: null,
    published_at: "2026-03-03T08:00:00+00:00",
    url: "https://example.com/oil-en",
  };
}

export function eventsPayload(): EventsResponse {
  return {
    events: [
      {
        event_id: 3,
        hashtags: ["fed", "rates"],
        first_seen: "2026-03-02T09:00:00+00:00",
        last_seen: "2026-03-02T10:30:00+00:00",
        languages: ["en", "zh"],
        sources: [
          { source: "reuters", articles: [fedEnReuters()] },
          { source: "caixin", articles: [fedZhCaixin()] },
        ],
      },
      {
        event_id: 5,
        hashtags: ["oil"],
        first_seen: "2026-03-03T08:00:00+00:00",
        last_seen: "2026-03-03T08:00:00+00:00",
        languages: ["en"],
        sources: [{ source: "reuters", articles: [oilEnReuters()] }],
      },
    ],
    page: 1,
    page_size: 20,
  };
}

export function searchPayload(): SearchResponse {
  return {
    query: "fed",
    groups: [
      {
        event_id: 3,
        hashtags: ["fed", "rates"],
        best_score: 4.21,
        articles: [
          {
            ...fedEnReuters(),
            score: 4.21,
            matched_hashtags: ["fed"],
            source: "reuters",
          },
          {
            ...fedZhCaixin(),
            score: 3.07,
            matched_hashtags: ["fed"],
            source: "caixin",
          },
        ],
      },
    ],
  };
}

export function crediblePayload(): FactcheckResponse {
  return { score: 0.87, label: "credible", model_version: "a".repeat(64) };
}

export function doubtfulPayload(): FactcheckResponse {
  return { score: 0.12, label: "doubtful", model_version: "a".repeat(64) };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface RecordedCall {
  url: string;
  init: RequestInit | undefined;
}

/** Injectable fetch that serves the handler's responses and records calls. */
export function stubFetch(
  handler: (url: string, init?: RequestInit) => Response | Promise<Response>,
): { impl: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const impl: FetchLike = async (url, init) => {
    calls.push({ url, init });
    return handler(url, init);
  };
  return { impl, calls };
}
