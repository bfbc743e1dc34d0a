"""Tokenization, TF-IDF vectors, cosine similarity, and BM25 search.

The clustering side of the pipeline consumes :func:`tfidf` vectors and
:func:`cosine`; the search side consumes an :class:`InvertedIndex` whose
ranking combines hashtag overlap with a BM25 content score.  Everything
here is pure and deterministic: identical inputs produce identical
outputs, which the clustering replay guarantees depend on.
"""

from __future__ import annotations

import json
import math
import re
import struct
from bisect import insort
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

_WORD_RE = re.compile(r"\w+", re.UNICODE)

# CJK Unified Ideographs, Extension A, and compatibility ideographs.
_CJK_RANGES = ((0x3400, 0x4DBF), (0x4E00, 0x9FFF), (0xF900, 0xFAFF))


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


@dataclass(frozen=True)
class TokenizerConfig:
    """Deterministic tokenizer settings.

    ``min_token_len`` applies to non-CJK word tokens; CJK output (character
    bigrams, or a lone character) always has an effective minimum of 1 so
    untranslated Chinese text stays indexable.
    """

    lowercase: bool = True
    cjk_mode: str = "char-bigram"  # or "passthrough"
    min_token_len: int = 2

    def __post_init__(self) -> None:
        if self.cjk_mode not in ("char-bigram", "passthrough"):
            raise ValueError(f"unknown cjk_mode {self.cjk_mode!r}")
        if self.min_token_len < 1:
            raise ValueError("min_token_len must be >= 1")


_DEFAULT_TOKENIZER = TokenizerConfig()


def tokenize(text: str, cfg: TokenizerConfig = _DEFAULT_TOKENIZER) -> list[str]:
    """Split ``text`` into lowercased word tokens on Unicode word boundaries.

    Contiguous CJK runs emit character bigrams (a single CJK character
    emits itself); in ``passthrough`` mode the run is emitted whole.
    Non-CJK tokens shorter than ``cfg.min_token_len`` are dropped.
    """
    if cfg.lowercase:
        text = text.lower()
    tokens: list[str] = []
    for match in _WORD_RE.finditer(text):
        run = match.group()
        # split the run into maximal CJK / non-CJK segments
        start = 0
        while start < len(run):
            cjk = _is_cjk(run[start])
            end = start + 1
            while end < len(run) and _is_cjk(run[end]) == cjk:
                end += 1
            seg = run[start:end]
            start = end
            if not cjk:
                if len(seg) >= cfg.min_token_len:
                    tokens.append(seg)
            elif cfg.cjk_mode == "passthrough" or len(seg) == 1:
                tokens.append(seg)
            else:
                tokens.extend(seg[i : i + 2] for i in range(len(seg) - 1))
    return tokens


class Vocabulary:
    """Term ids, document frequencies, and the corpus document count.

    Ids are dense and assigned in first-seen order, so building a
    vocabulary over the same corpus in the same order is reproducible.
    """

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}
        self._terms: list[str] = []
        self._df: list[int] = []
        self.doc_count = 0

    def __len__(self) -> int:
        return len(self._terms)

    def add_document(self, tokens: list[str]) -> None:
        self.doc_count += 1
        for term in set(tokens):
            tid = self._ids.get(term)
            if tid is None:
                self._ids[term] = len(self._terms)
                self._terms.append(term)
                self._df.append(1)
            else:
                self._df[tid] += 1

    def id_of(self, term: str) -> int | None:
        return self._ids.get(term)

    def term_of(self, term_id: int) -> str:
        return self._terms[term_id]

    def df(self, term_id: int) -> int:
        return self._df[term_id]


@dataclass(frozen=True)
class SparseVector:
    """Sorted (term id, weight) pairs with a cached L2 norm.

    Zero-weight entries are never stored and ids are strictly increasing.
    """

    ids: tuple[int, ...]
    weights: tuple[float, ...]
    norm: float

    @classmethod
    def from_pairs(cls, pairs: dict[int, float] | list[tuple[int, float]]) -> "SparseVector":
        items = sorted(pairs.items() if isinstance(pairs, dict) else pairs)
        items = [(i, w) for i, w in items if w != 0.0]
        norm = math.sqrt(sum(w * w for _, w in items))
        return cls(tuple(i for i, _ in items), tuple(w for _, w in items), norm)

    @classmethod
    def empty(cls) -> "SparseVector":
        return cls((), (), 0.0)

    def __len__(self) -> int:
        return len(self.ids)

    def dot(self, other: "SparseVector") -> float:
        if len(self.ids) > len(other.ids):
            self, other = other, self
        lookup = dict(zip(other.ids, other.weights))
        return sum(w * lookup[i] for i, w in zip(self.ids, self.weights) if i in lookup)

    def scaled(self, factor: float) -> "SparseVector":
        return SparseVector(self.ids, tuple(w * factor for w in self.weights), self.norm * factor)


def tfidf(tokens: list[str], vocab: Vocabulary) -> SparseVector:
    """L2-normalized TF-IDF: weight(t) = (1 + ln tf) * ln((N+1)/(df+1)).

    Terms unknown to ``vocab`` are ignored.  Terms whose idf is zero
    (df == N) drop out of the vector entirely.
    """
    counts: Counter[int] = Counter()
    for token in tokens:
        tid = vocab.id_of(token)
        if tid is not None:
            counts[tid] += 1
    n = vocab.doc_count
    weights = {}
    for tid, tf in counts.items():
        w = (1.0 + math.log(tf)) * math.log((n + 1) / (vocab.df(tid) + 1))
        if w != 0.0:
            weights[tid] = w
    vec = SparseVector.from_pairs(weights)
    if vec.norm == 0.0:
        return SparseVector.empty()
    return SparseVector(vec.ids, tuple(w / vec.norm for w in vec.weights), 1.0)


def mean_normalized(vectors: list[SparseVector]) -> SparseVector:
    """L2-normalized mean of sparse vectors (the cluster centroid rule)."""
    acc: dict[int, float] = {}
    for vec in vectors:
        for i, w in zip(vec.ids, vec.weights):
            acc[i] = acc.get(i, 0.0) + w / len(vectors)
    mean = SparseVector.from_pairs(acc)
    if mean.norm == 0.0:
        return SparseVector.empty()
    return SparseVector(mean.ids, tuple(w / mean.norm for w in mean.weights), 1.0)


def cosine(u: SparseVector, v: SparseVector) -> float:
    """dot(u, v) / (|u| * |v|); 0 when either norm is zero."""
    if u.norm == 0.0 or v.norm == 0.0:
        return 0.0
    return u.dot(v) / (u.norm * v.norm)


@dataclass(frozen=True)
class SearchWeights:
    """Linear combination weights for hashtag and content scores."""

    w_hashtag: float = 2.0
    w_content: float = 1.0

    def __post_init__(self) -> None:
        if self.w_hashtag < 0 or self.w_content < 0:
            raise ValueError("search weights must be non-negative")
        if self.w_hashtag == 0 and self.w_content == 0:
            raise ValueError("search weights must not both be zero")


class InvertedIndex:
    """BM25 inverted index with per-document hashtag sets.

    Postings are kept sorted by document id; BM25 uses k1=1.2, b=0.75 and
    idf(t) = ln(1 + (N - df + 0.5)/(df + 0.5)).
    """

    K1 = 1.2
    B = 0.75

    def __init__(self, tokenizer: TokenizerConfig = _DEFAULT_TOKENIZER) -> None:
        self.tokenizer = tokenizer
        self._term_ids: dict[str, int] = {}
        self._postings: list[list[tuple[str, int]]] = []  # term id -> [(doc id, tf)]
        self._doc_len: dict[str, int] = {}
        self._hashtags: dict[str, frozenset[str]] = {}

    def __len__(self) -> int:
        return len(self._doc_len)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._doc_len

    @property
    def avg_doc_len(self) -> float:
        if not self._doc_len:
            return 0.0
        return sum(self._doc_len.values()) / len(self._doc_len)

    def hashtags(self, doc_id: str) -> frozenset[str]:
        return self._hashtags[doc_id]

    def add(self, doc_id: str, tokens: list[str], hashtags: list[str] | set[str] = ()) -> None:
        if doc_id in self._doc_len:
            raise ValueError(f"document {doc_id!r} already indexed")
        self._doc_len[doc_id] = len(tokens)
        self._hashtags[doc_id] = frozenset(hashtags)
        for term, tf in Counter(tokens).items():
            tid = self._term_ids.get(term)
            if tid is None:
                tid = len(self._postings)
                self._term_ids[term] = tid
                self._postings.append([])
            insort(self._postings[tid], (doc_id, tf))

    def _tf(self, term: str, doc_id: str) -> int:
        tid = self._term_ids.get(term)
        if tid is None:
            return 0
        for doc, tf in self._postings[tid]:
            if doc == doc_id:
                return tf
        return 0

    def idf(self, term: str) -> float:
        tid = self._term_ids.get(term)
        if tid is None:
            return math.log(1.0 + (len(self) + 0.5) / 0.5) if len(self) else 0.0
        df = len(self._postings[tid])
        return math.log(1.0 + (len(self) - df + 0.5) / (df + 0.5))

    def bm25(self, query_tokens: list[str], doc_id: str) -> float:
        """BM25 score of one document for the unique query terms."""
        if doc_id not in self._doc_len:
            raise ValueError(f"unknown document id {doc_id!r}")
        dl = self._doc_len[doc_id]
        avgdl = self.avg_doc_len
        score = 0.0
        for term in sorted(set(query_tokens)):
            tf = self._tf(term, doc_id)
            if tf == 0:
                continue
            norm = self.K1 * (1.0 - self.B + self.B * dl / avgdl)
            score += self.idf(term) * (tf * (self.K1 + 1.0)) / (tf + norm)
        return score

    def candidates(self, query_tokens: list[str]) -> set[str]:
        """Documents with at least one term match or hashtag overlap."""
        terms = set(query_tokens)
        docs: set[str] = set()
        for term in terms:
            tid = self._term_ids.get(term)
            if tid is not None:
                docs.update(doc for doc, _ in self._postings[tid])
        for doc_id, tags in self._hashtags.items():
            if terms & tags:
                docs.add(doc_id)
        return docs


def search(
    index: InvertedIndex,
    query: str,
    weights: SearchWeights = SearchWeights(),
    limit: int = 10,
) -> list[tuple[str, float, list[str]]]:
    """Rank documents by w_hashtag * |query ∩ hashtags| + w_content * bm25.

    Zero-scoring documents are excluded; ties break by ascending doc id.
    Returns (doc id, score, matched hashtags) triples.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    tokens = tokenize(query, index.tokenizer)
    if not tokens:
        raise ValueError("empty query")
    terms = set(tokens)
    scored = []
    for doc_id in index.candidates(tokens):
        matched = sorted(terms & index.hashtags(doc_id))
        score = weights.w_hashtag * len(matched) + weights.w_content * index.bm25(tokens, doc_id)
        if score > 0.0:
            scored.append((doc_id, score, matched))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:limit]


SNAPSHOT_MAGIC = b"FFIX1"


def save_snapshot(index: InvertedIndex, path: str | Path) -> None:
    """Write a versioned binary snapshot (magic "FFIX1")."""
    payload = json.dumps(
        {
            "tokenizer": {
                "lowercase": index.tokenizer.lowercase,
                "cjk_mode": index.tokenizer.cjk_mode,
                "min_token_len": index.tokenizer.min_token_len,
            },
            "postings": {term: index._postings[tid] for term, tid in index._term_ids.items()},
            "doc_len": index._doc_len,
            "hashtags": {doc: sorted(tags) for doc, tags in index._hashtags.items()},
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", len(payload)))
        fh.write(payload)


def load_snapshot(path: str | Path) -> InvertedIndex:
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"not an index snapshot (magic {magic!r}, expected {SNAPSHOT_MAGIC!r})")
        (length,) = struct.unpack("<I", fh.read(4))
        payload = fh.read(length)
        if len(payload) != length:
            raise ValueError(f"truncated snapshot: expected {length} payload bytes, got {len(payload)}")
    data = json.loads(payload)
    index = InvertedIndex(TokenizerConfig(**data["tokenizer"]))
    index._doc_len = dict(data["doc_len"])
    index._hashtags = {doc: frozenset(tags) for doc, tags in data["hashtags"].items()}
    for term in sorted(data["postings"]):
        index._term_ids[term] = len(index._postings)
        index._postings.append([(doc, tf) for doc, tf in data["postings"][term]])
    return index
