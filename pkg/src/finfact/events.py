"""Online clustering of article vectors into cross-lingual events.

Articles are embedded as TF-IDF vectors of their English pivot text under
a vocabulary covering the whole corpus being clustered, then assigned in
insertion order by a single-pass threshold rule: join the highest-cosine
cluster when the similarity reaches tau, otherwise start a new event.
Cross-lingual linking falls out of translate-then-cluster: a Chinese and
an English report of the same event share pivot-space terms.

Because TF-IDF statistics are corpus-level, ingesting new articles
invalidates earlier vectors; callers re-cluster via :func:`rebuild`,
which replays the assignment rule over the store in insertion order and
is deterministic for a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

from .corpus import Article
from .textindex import (
    SparseVector,
    TokenizerConfig,
    Vocabulary,
    cosine,
    mean_normalized,
    tfidf,
    tokenize,
)


@dataclass(frozen=True)
class ClustererConfig:
    tau: float = 0.30
    k_hashtags: int = 5
    time_window_days: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.k_hashtags < 1:
            raise ValueError("k_hashtags must be >= 1")
        if self.time_window_days is not None and self.time_window_days <= 0:
            raise ValueError("time_window_days must be positive")


@dataclass(frozen=True)
class MemberRecord:
    """Article fields the board and event JSON need, frozen at assignment."""

    article_id: str
    source: str
    language: str
    published_at: datetime
    title: str
    pivot_title: str | None
    url: str | None = None


@dataclass
class EventCluster:
    event_id: int
    centroid: SparseVector
    members: list[MemberRecord]
    member_vecs: list[SparseVector]
    hashtags: list[str]
    languages: set[str]
    first_seen: datetime
    last_seen: datetime
    unclusterable: bool = False

    @property
    def member_ids(self) -> list[str]:
        return [m.article_id for m in self.members]


class ClustererState:
    """All clusters plus the vocabulary used to vectorize their members."""

    def __init__(self, vocab: Vocabulary) -> None:
        self.vocab = vocab
        self.clusters: list[EventCluster] = []
        self.assignments: dict[str, int] = {}  # article id -> event id

    def __len__(self) -> int:
        return len(self.clusters)


def _member_record(article: Article) -> MemberRecord:
    return MemberRecord(
        article_id=article.id,
        source=article.source,
        language=article.language,
        published_at=article.published_at,
        title=article.title,
        pivot_title=article.pivot_title,
        url=article.url,
    )


def _eligible(cluster: EventCluster, article: Article, cfg: ClustererConfig) -> bool:
    if cfg.time_window_days is None:
        return True
    delta = abs((article.published_at - cluster.last_seen).total_seconds())
    return delta <= cfg.time_window_days * 86400.0


def extract_hashtags(cluster: EventCluster, cfg: ClustererConfig, vocab: Vocabulary) -> list[str]:
    """The k highest-weight centroid terms; equal weights break lexicographically."""
    terms = [
        (weight, vocab.term_of(tid))
        for tid, weight in zip(cluster.centroid.ids, cluster.centroid.weights)
    ]
    terms.sort(key=lambda item: (-item[0], item[1]))
    return [term for _, term in terms[: cfg.k_hashtags]]


def assign(
    state: ClustererState,
    article: Article,
    vec: SparseVector,
    cfg: ClustererConfig,
) -> tuple[int, bool]:
    """Assign one article vector to an event; returns (event id, created).

    Joins the argmax-cosine eligible cluster when the similarity reaches
    ``cfg.tau`` (ties break toward the lowest event id), otherwise creates
    a new cluster with the vector as its centroid.  Zero-norm vectors
    become singleton clusters flagged unclusterable.
    """
    if article.id in state.assignments:
        raise ValueError(f"article {article.id} already assigned")

    best: EventCluster | None = None
    best_score = -1.0
    if vec.norm != 0.0:
        for cluster in state.clusters:  # ascending event id: strict > keeps lowest on ties
            if not _eligible(cluster, article, cfg):
                continue
            score = cosine(vec, cluster.centroid)
            if score > best_score:
                best, best_score = cluster, score

    if best is not None and best_score >= cfg.tau:
        best.members.append(_member_record(article))
        best.member_vecs.append(vec)
        best.centroid = mean_normalized(best.member_vecs)
        best.languages.add(article.language)
        best.first_seen = min(best.first_seen, article.published_at)
        best.last_seen = max(best.last_seen, article.published_at)
        best.hashtags = extract_hashtags(best, cfg, state.vocab)
        state.assignments[article.id] = best.event_id
        return best.event_id, False

    cluster = EventCluster(
        event_id=len(state.clusters),
        centroid=vec,
        members=[_member_record(article)],
        member_vecs=[vec],
        hashtags=[],
        languages={article.language},
        first_seen=article.published_at,
        last_seen=article.published_at,
        unclusterable=vec.norm == 0.0,
    )
    cluster.hashtags = extract_hashtags(cluster, cfg, state.vocab)
    state.clusters.append(cluster)
    state.assignments[article.id] = cluster.event_id
    return cluster.event_id, True


def rebuild(
    articles: list[Article],
    cfg: ClustererConfig,
    tokenizer: TokenizerConfig = TokenizerConfig(),
) -> ClustererState:
    """Cluster ``articles`` in order under a vocabulary covering them all.

    Equivalent to vectorizing every article against the full-corpus
    vocabulary and calling :func:`assign` incrementally in the same order.
    """
    vocab = Vocabulary()
    token_lists = []
    for article in articles:
        tokens = tokenize(article.pivot_text(), tokenizer)
        token_lists.append(tokens)
        vocab.add_document(tokens)
    state = ClustererState(vocab)
    for article, tokens in zip(articles, token_lists):
        assign(state, article, tfidf(tokens, vocab), cfg)
    return state


def event_json(cluster: EventCluster) -> dict:
    """The flat event wire format."""
    return {
        "event_id": cluster.event_id,
        "hashtags": list(cluster.hashtags),
        "first_seen": cluster.first_seen.isoformat(),
        "last_seen": cluster.last_seen.isoformat(),
        "languages": sorted(cluster.languages),
        "members": [
            {
                "article_id": m.article_id,
                "source": m.source,
                "language": m.language,
                "title": m.title,
                "pivot_title": m.pivot_title,
            }
            for m in cluster.members
        ],
    }


def _display_title(member: MemberRecord, lang: str) -> str:
    # "zh" surfaces the original-language title; "en" surfaces the pivot.
    if lang == "zh":
        return member.title
    return member.pivot_title if member.pivot_title is not None else member.title


def event_board(
    state: ClustererState,
    lang: str = "en",
    page: int = 1,
    page_size: int = 20,
) -> list[dict]:
    """Board rows: events by recency, members grouped per source column.

    The language filter only selects which title is surfaced; it never
    hides events.  Pages beyond the end return no rows.
    """
    if page < 1:
        raise ValueError("page must be >= 1")
    if page_size < 1:
        raise ValueError("page_size must be >= 1")
    ordered = sorted(state.clusters, key=lambda c: (c.last_seen, c.event_id), reverse=True)
    start = (page - 1) * page_size
    rows = []
    for cluster in ordered[start : start + page_size]:
        by_source: dict[str, list[MemberRecord]] = {}
        for member in cluster.members:
            by_source.setdefault(member.source, []).append(member)
        rows.append(
            {
                "event_id": cluster.event_id,
                "hashtags": list(cluster.hashtags),
                "first_seen": cluster.first_seen.isoformat(),
                "last_seen": cluster.last_seen.isoformat(),
                "languages": sorted(cluster.languages),
                "sources": [
                    {
                        "source": source,
                        "articles": [
                            {
                                "article_id": m.article_id,
                                "language": m.language,
                                "title": _display_title(m, lang),
                                "original_title": m.title,
                                "pivot_title": m.pivot_title,
                                "published_at": m.published_at.isoformat(),
                                "url": m.url,
                            }
                            for m in sorted(
                                members, key=lambda m: (m.published_at, m.article_id)
                            )
                        ],
                    }
                    for source, members in sorted(by_source.items())
                ],
            }
        )
    return rows
