"""Pipeline façade tying store, translation, clustering, search, and scoring.

Writes (ingest) rebuild clustering and the search index over the whole store
and then swap in an immutable snapshot; readers always see a consistent
snapshot without locking. Desk-scale corpora make the full rebuild cheap,
and it keeps incremental assignment equivalent to a replay of the rule.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path

from .corpus import (
    Article,
    ArticleStore,
    Translator,
    parse_articles,
    pivot,
)
from .events import ClustererConfig, ClustererState, event_board, rebuild
from .factcheck.checkpoint import checkpoint_digest, load_checkpoint
from .factcheck.train import credibility_score
from .textindex import (
    InvertedIndex,
    SearchWeights,
    TokenizerConfig,
    Vocabulary,
    search as ranked_search,
    tokenize,
)


class ModelUnavailable(Exception):
    """Raised when credibility scoring is requested without a checkpoint."""


@dataclass(frozen=True)
class Snapshot:
    state: ClustererState
    index: InvertedIndex
    articles: dict[str, Article]


class NewsEngine:
    def __init__(
        self,
        store_dir: str | Path,
        clusterer: ClustererConfig = ClustererConfig(),
        weights: SearchWeights = SearchWeights(),
        tokenizer: TokenizerConfig = TokenizerConfig(),
        translator: Translator | None = None,
        checkpoint_path: str | Path | None = None,
    ) -> None:
        self._store = ArticleStore(store_dir)
        self._clusterer_cfg = clusterer
        self._weights = weights
        self._tokenizer = tokenizer
        self._translator = translator
        self._write_lock = threading.Lock()
        self._snapshot = Snapshot(ClustererState(Vocabulary()), InvertedIndex(tokenizer), {})
        self._params = None
        self._model_vocab: list[str] | None = None
        self._model_version: str | None = None
        self._score_tokenizer = tokenizer
        if checkpoint_path is not None:
            self._params, self._model_vocab, meta = load_checkpoint(checkpoint_path)
            self._model_version = checkpoint_digest(checkpoint_path)
            if "tokenizer" in meta:
                self._score_tokenizer = TokenizerConfig(**meta["tokenizer"])
        self.refresh()

    @property
    def snapshot(self) -> Snapshot:
        return self._snapshot

    @property
    def model_loaded(self) -> bool:
        return self._params is not None

    def refresh(self) -> Snapshot:
        """Recluster and reindex the whole store, then swap the snapshot."""
        with self._write_lock:
            return self._rebuild_locked()

    def _rebuild_locked(self) -> Snapshot:
        articles = list(self._store.scan())
        state = rebuild(articles, self._clusterer_cfg, self._tokenizer)
        index = InvertedIndex(self._tokenizer)
        for article in articles:
            event_id = state.assignments[article.id]
            index.add(
                article.id,
                tokenize(article.pivot_text(), self._tokenizer),
                state.clusters[event_id].hashtags,
            )
        snapshot = Snapshot(state, index, {a.id: a for a in articles})
        self._snapshot = snapshot
        return snapshot

    def ingest(self, payload: bytes | str | list[Article]) -> dict:
        """Parse, pivot, persist, and recluster a batch of articles.

        Returns accepted/duplicate counts and each input article's event.
        Raises ParseError on malformed payloads and TranslationError when
        the remote translator stays unavailable.
        """
        articles = payload if isinstance(payload, list) else parse_articles(payload)
        with self._write_lock:
            accepted = 0
            duplicates = 0
            ingested_ids: list[str] = []
            for article in articles:
                if self._translator is not None:
                    article = pivot(article, self._translator)
                if article.id in self._store:
                    duplicates += 1
                else:
                    self._store.append(article)
                    accepted += 1
                ingested_ids.append(article.id)
            snapshot = self._rebuild_locked()
        return {
            "accepted": accepted,
            "duplicates": duplicates,
            "event_assignments": [
                {"article_id": aid, "event_id": snapshot.state.assignments[aid]}
                for aid in ingested_ids
            ],
        }

    def board(self, lang: str = "en", page: int = 1, page_size: int = 20) -> list[dict]:
        return event_board(self._snapshot.state, lang, page, page_size)

    def search(self, query: str, lang: str = "en", limit: int = 20) -> dict:
        """Ranked article hits grouped by event, best-scoring event first."""
        snapshot = self._snapshot
        hits = ranked_search(snapshot.index, query, self._weights, limit)
        groups: dict[int, dict] = {}
        for doc_id, score, matched in hits:
            event_id = snapshot.state.assignments[doc_id]
            article = snapshot.articles[doc_id]
            group = groups.setdefault(
                event_id,
                {
                    "event_id": event_id,
                    "hashtags": list(snapshot.state.clusters[event_id].hashtags),
                    "best_score": score,
                    "articles": [],
                },
            )
            title = article.title if lang == "zh" else (article.pivot_title or article.title)
            group["articles"].append(
                {
                    "article_id": doc_id,
                    "score": score,
                    "matched_hashtags": matched,
                    "source": article.source,
                    "language": article.language,
                    "title": title,
                    "original_title": article.title,
                    "pivot_title": article.pivot_title,
                    "published_at": article.published_at.isoformat(),
                    "url": article.url,
                }
            )
        ordered = sorted(groups.values(), key=lambda g: (-g["best_score"], g["event_id"]))
        return {"query": query, "groups": ordered}

    def credibility(self, text: str) -> dict:
        """Score a text with the loaded checkpoint; 'credible' at >= 0.5."""
        if self._params is None or self._model_vocab is None:
            raise ModelUnavailable("no model checkpoint loaded")
        score = credibility_score(self._params, self._model_vocab, text, self._score_tokenizer)
        return {
            "score": score,
            "label": "credible" if score >= 0.5 else "doubtful",
            "model_version": self._model_version,
        }

    def counts(self) -> dict:
        snapshot = self._snapshot
        return {
            "articles": len(snapshot.articles),
            "events": len(snapshot.state.clusters),
            "model_loaded": self.model_loaded,
        }
