/** Response shapes of the finfact HTTP API, field for field. */

export interface BoardArticle {
  article_id: string;
  language: string;
  title: string;
  original_title: string;
  pivot_title: string | null;
  published_at: string;
  url: string | null;
}

export interface SourceColumn {
  source: string;
  articles: BoardArticle[];
}

export interface EventRow {
  event_id: number;
  hashtags: string[];
  first_seen: string;
  last_seen: string;
  languages: string[];
  sources: SourceColumn[];
}

export interface EventsResponse {
  events: EventRow[];
  page: number;
  page_size: number;
}

export interface SearchArticle extends BoardArticle {
  score: number;
  matched_hashtags: string[];
  source: string;
}

export interface SearchGroup {
  event_id: number;
  hashtags: string[];
  best_score: number;
  articles: SearchArticle[];
}

export interface SearchResponse {
  query: string;
  groups: SearchGroup[];
}

export interface FactcheckResponse {
  score: number;
  label: "credible" | "doubtful";
  model_version: string | null;
}

export interface HealthResponse {
  status: string;
  articles: number;
  events: number;
  model_loaded: boolean;
}

export interface ErrorBody {
  status: number;
  code: string;
  message: string;
}
