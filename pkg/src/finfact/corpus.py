"""Article ingestion, deduplication, persistence, and pivot translation.

Articles arrive as line-delimited JSON, get a deterministic content-derived
id, and live in an append-only log with an id -> byte-offset index.
Non-English articles are translated into the English pivot before
clustering, either through a glossary stub (tests, offline use) or a
remote HTTP translator with caching and bounded retries.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .textindex import _is_cjk

# ISO 639-1 two-letter codes.
ISO_639_1 = frozenset(
    "aa ab ae af ak am an ar as av ay az ba be bg bh bi bm bn bo br bs ca ce ch co cr cs cu cv cy "
    "da de dv dz ee el en eo es et eu fa ff fi fj fo fr fy ga gd gl gn gu gv ha he hi ho hr ht hu "
    "hy hz ia id ie ig ii ik io is it iu ja jv ka kg ki kj kk kl km kn ko kr ks ku kv kw ky la lb "
    "lg li ln lo lt lu lv mg mh mi mk ml mn mr ms mt my na nb nd ne ng nl nn no nr nv ny oc oj om "
    "or os pa pi pl ps pt qu rm rn ro ru rw sa sc sd se sg si sk sl sm sn so sq sr ss st su sv sw "
    "ta te tg th ti tk tl tn to tr ts tt tw ty ug uk ur uz ve vi vo wa wo xh yi yo za zh zu".split()
)

_WS_RE = re.compile(r"\s+")

REQUIRED_KEYS = ("source", "language", "published_at", "title", "body")


class ParseError(ValueError):
    """Invalid article payload; the message names the offending line/key."""


class ConfigError(ValueError):
    """Invalid translator or server configuration."""


class StoreError(Exception):
    """Article store I/O failure or corruption; names the byte offset."""


class TranslationError(Exception):
    """Remote translation failed after bounded retries."""

    def __init__(self, message: str, status: int | None = None) -> None:
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class Article:
    """One news item; ``id`` is derived from (source, title, publish date)."""

    id: str
    source: str
    language: str
    published_at: datetime  # aware, UTC, seconds precision
    title: str
    body: str
    url: str | None = None
    pivot_title: str | None = None
    pivot_body: str | None = None

    def to_json(self) -> dict:
        obj = {
            "id": self.id,
            "source": self.source,
            "language": self.language,
            "published_at": self.published_at.isoformat(),
            "title": self.title,
            "body": self.body,
        }
        if self.url is not None:
            obj["url"] = self.url
        if self.pivot_title is not None:
            obj["pivot_title"] = self.pivot_title
        if self.pivot_body is not None:
            obj["pivot_body"] = self.pivot_body
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "Article":
        return cls(
            id=obj["id"],
            source=obj["source"],
            language=obj["language"],
            published_at=parse_timestamp(obj["published_at"]),
            title=obj["title"],
            body=obj["body"],
            url=obj.get("url"),
            pivot_title=obj.get("pivot_title"),
            pivot_body=obj.get("pivot_body"),
        )

    def pivot_text(self) -> str:
        """Title + body in the pivot language (original text for English)."""
        title = self.pivot_title if self.pivot_title is not None else self.title
        body = self.pivot_body if self.pivot_body is not None else self.body
        return f"{title}\n{body}"


def parse_timestamp(value: str) -> datetime:
    """RFC 3339 timestamp -> aware UTC datetime at seconds precision.

    Timestamps without a timezone are assumed UTC.
    """
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def _normalize_title(title: str) -> str:
    return _WS_RE.sub(" ", title).strip()


def compute_id(source: str, title: str, published_at: datetime) -> str:
    canonical = "\x00".join(
        (source, _normalize_title(title).lower(), published_at.date().isoformat())
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def dedup_key(article: Article) -> str:
    """Hex digest of source + NUL + normalized lowercase title + NUL + date.

    Body and url are deliberately excluded: near-duplicate wire copies
    differ in boilerplate, while title+source+date is the stable identity.
    """
    return compute_id(article.source, article.title, article.published_at)


def _article_from_obj(obj: object, where: str) -> Article:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected a JSON object, got {type(obj).__name__}")
    for key in REQUIRED_KEYS:
        if key not in obj:
            raise ParseError(f"{where}: missing required key '{key}'")
    language = str(obj["language"]).lower()
    if language not in ISO_639_1:
        raise ParseError(f"{where}: unknown language code '{obj['language']}'")
    title = str(obj["title"])
    if not _normalize_title(title):
        raise ParseError(f"{where}: title is empty")
    try:
        published_at = parse_timestamp(str(obj["published_at"]))
    except ValueError as exc:
        raise ParseError(f"{where}: bad published_at: {exc}") from exc
    article = Article(
        id="",
        source=str(obj["source"]),
        language=language,
        published_at=published_at,
        title=title,
        body=str(obj["body"]),
        url=obj.get("url"),
        pivot_title=obj.get("pivot_title"),
        pivot_body=obj.get("pivot_body"),
    )
    return replace(article, id=dedup_key(article))


def articles_from_objects(objs: Iterable[object]) -> list[Article]:
    """Build Articles from already-decoded JSON objects (array payloads)."""
    return [_article_from_obj(obj, f"item {i}") for i, obj in enumerate(objs, start=1)]


def parse_articles(stream: bytes | str | Iterable[bytes | str]) -> list[Article]:
    """Parse line-delimited JSON into Articles, preserving line order.

    Blank lines are skipped.  Errors name the 1-based line number.
    """
    if isinstance(stream, bytes):
        lines: Iterable[bytes | str] = stream.splitlines()
    elif isinstance(stream, str):
        lines = stream.splitlines()
    else:
        lines = stream
    articles = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
        articles.append(_article_from_obj(obj, f"line {lineno}"))
    return articles


@dataclass(frozen=True)
class TranslatorConfig:
    """Translator settings; mode selects glossary stub or remote HTTP."""

    mode: str  # "glossary-stub" | "remote"
    glossary_path: str | Path | None = None
    endpoint: str | None = None
    api_key: str | None = None
    max_requests_per_second: float = 10.0
    cache_path: str | Path | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("glossary-stub", "remote"):
            raise ConfigError(f"unknown translator mode {self.mode!r}")
        if self.mode == "remote" and not self.endpoint:
            raise ConfigError("remote mode requires an endpoint")
        if self.mode == "glossary-stub" and not self.glossary_path:
            raise ConfigError("glossary-stub mode requires glossary_path")
        if self.max_requests_per_second <= 0:
            raise ConfigError("max_requests_per_second must be positive")


def load_glossary(path: str | Path) -> dict[str, str]:
    """Load a UTF-8 glossary of tab-separated source/target term pairs."""
    glossary: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                if "\t" not in line:
                    raise ConfigError(f"glossary line without a tab separator: {line!r}")
                src, dst = line.split("\t", 1)
                glossary[src] = dst
    except OSError as exc:
        raise ConfigError(f"cannot read glossary {path}: {exc}") from exc
    return glossary


def _default_transport(endpoint: str, payload: dict, api_key: str | None, timeout: float):
    import requests

    headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
    resp = requests.post(endpoint, json=payload, headers=headers, timeout=timeout)
    try:
        body = resp.json()
    except ValueError:
        body = {}
    return resp.status_code, body


class Translator:
    """Token-level glossary stub or cached remote HTTP translator.

    Remote results are cached by (sha256(text), src, dst); cache hits never
    reach the network.  Concurrent lookups are safe; concurrent misses on
    one key may both call out, last write wins.
    """

    MAX_ATTEMPTS = 3

    def __init__(
        self,
        cfg: TranslatorConfig,
        transport: Callable[..., tuple[int, dict]] | None = None,
        backoff_base: float = 0.5,
    ) -> None:
        self.cfg = cfg
        self._transport = transport or _default_transport
        self._backoff_base = backoff_base
        self._glossary: dict[str, str] = {}
        self._max_key_len = 0
        if cfg.mode == "glossary-stub":
            self._glossary = load_glossary(cfg.glossary_path)
            self._max_key_len = max((len(k) for k in self._glossary), default=0)
        self._cache: dict[tuple[str, str, str], str] = {}
        self._cache_lock = threading.Lock()
        self._last_request = 0.0
        if cfg.cache_path and os.path.exists(cfg.cache_path):
            with open(cfg.cache_path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        entry = json.loads(line)
                        self._cache[(entry["digest"], entry["src"], entry["dst"])] = entry["text"]

    def translate(self, text: str, src: str, dst: str) -> str:
        if src == dst:
            raise ValueError("translate requires src != dst")
        if not text:
            return ""
        if self.cfg.mode == "glossary-stub":
            return self._glossary_translate(text)
        return self._remote_translate(text, src, dst)

    # -- glossary stub ------------------------------------------------

    def _glossary_translate(self, text: str) -> str:
        parts = []
        for chunk in re.split(r"(\s+)", text):
            if not chunk:
                continue
            if chunk.isspace():
                parts.append(chunk)
            else:
                parts.append(self._translate_chunk(chunk))
        return "".join(parts)

    def _translate_chunk(self, chunk: str) -> str:
        hit = self._glossary.get(chunk)
        if hit is not None:
            return hit
        if not any(_is_cjk(ch) for ch in chunk):
            return chunk  # unknown non-CJK token passes through
        # greedy longest-match segmentation for unspaced CJK text
        out: list[str] = []
        pos = 0
        while pos < len(chunk):
            match = None
            for length in range(min(self._max_key_len, len(chunk) - pos), 0, -1):
                candidate = chunk[pos : pos + length]
                if candidate in self._glossary:
                    match = candidate
                    break
            if match is None:
                out.append(chunk[pos])
                pos += 1
            else:
                out.append(self._glossary[match])
                pos += len(match)
        return " ".join(out)

    # -- remote -------------------------------------------------------

    def _remote_translate(self, text: str, src: str, dst: str) -> str:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        key = (digest, src, dst)
        with self._cache_lock:
            if key in self._cache:
                return self._cache[key]
        api_key = self.cfg.api_key or os.environ.get("FINFACT_TRANSLATE_API_KEY")
        payload = {"text": text, "src": src, "dst": dst}
        last_status: int | None = None
        last_error = "no attempts made"
        for attempt in range(self.MAX_ATTEMPTS):
            if attempt:
                time.sleep(self._backoff_base * 2 ** (attempt - 1))
            self._throttle()
            try:
                status, body = self._transport(self.cfg.endpoint, payload, api_key, 10.0)
            except Exception as exc:  # network-level failure
                last_status, last_error = None, str(exc)
                continue
            if status == 200 and "text" in body:
                result = str(body["text"])
                self._store(key, text, src, dst, result)
                return result
            last_status, last_error = status, f"HTTP {status}"
        raise TranslationError(
            f"translation failed after {self.MAX_ATTEMPTS} attempts: {last_error}",
            status=last_status,
        )

    def _throttle(self) -> None:
        interval = 1.0 / self.cfg.max_requests_per_second
        wait = self._last_request + interval - time.monotonic()
        if wait > 0:
            time.sleep(wait)
        self._last_request = time.monotonic()

    def _store(self, key: tuple[str, str, str], text: str, src: str, dst: str, result: str) -> None:
        with self._cache_lock:
            self._cache[key] = result
            if self.cfg.cache_path:
                entry = {"digest": key[0], "src": src, "dst": dst, "text": result}
                with open(self.cfg.cache_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


PIVOT_LANGUAGE = "en"


def pivot(article: Article, translator: Translator) -> Article:
    """Fill pivot_title/pivot_body via translation into English.

    English articles and already-pivoted articles are returned unchanged,
    so the operation is idempotent.
    """
    if article.language == PIVOT_LANGUAGE:
        return article
    if article.pivot_title is not None and article.pivot_body is not None:
        return article
    return replace(
        article,
        pivot_title=translator.translate(article.title, article.language, PIVOT_LANGUAGE),
        pivot_body=translator.translate(article.body, article.language, PIVOT_LANGUAGE),
    )


class ArticleStore:
    """Append-only article log with an id -> byte-offset index.

    Layout: ``articles.log`` (one JSON article per line) and
    ``articles.idx`` (tab-separated id/offset pairs, rebuildable by a full
    scan).  A stored id is never overwritten; iteration follows insertion
    order.  Single writer, any number of concurrent readers.
    """

    LOG_NAME = "articles.log"
    IDX_NAME = "articles.idx"

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._log_path = self.root / self.LOG_NAME
        self._idx_path = self.root / self.IDX_NAME
        self._lock = threading.Lock()
        self._offsets: dict[str, int] = {}
        self._load_index()

    def _load_index(self) -> None:
        self._offsets = {}
        if not self._log_path.exists():
            self._log_path.touch()
        log_size = self._log_path.stat().st_size
        if self._idx_path.exists():
            try:
                with open(self._idx_path, encoding="utf-8") as fh:
                    for line in fh:
                        if not line.strip():
                            continue
                        article_id, offset = line.rstrip("\n").split("\t")
                        if int(offset) >= log_size:
                            raise ValueError("stale index entry")
                        self._offsets[article_id] = int(offset)
                return
            except (ValueError, OSError):
                self._offsets = {}
        self._rebuild_index()

    def _rebuild_index(self) -> None:
        self._offsets = {}
        for article_id, offset, _ in self._iter_log():
            self._offsets.setdefault(article_id, offset)
        with open(self._idx_path, "w", encoding="utf-8") as fh:
            for article_id, offset in self._offsets.items():
                fh.write(f"{article_id}\t{offset}\n")

    def _iter_log(self) -> Iterator[tuple[str, int, Article]]:
        with open(self._log_path, "rb") as fh:
            offset = 0
            for raw in fh:
                line = raw.rstrip(b"\n")
                if line:
                    try:
                        article = Article.from_json(json.loads(line))
                    except (ValueError, KeyError) as exc:
                        raise StoreError(f"corrupt article log at offset {offset}: {exc}") from exc
                    yield article.id, offset, article
                offset += len(raw)

    def __len__(self) -> int:
        return len(self._offsets)

    def __contains__(self, article_id: str) -> bool:
        return article_id in self._offsets

    def append(self, article: Article) -> str:
        """Store the article; a no-op returning the existing id if present."""
        with self._lock:
            if article.id in self._offsets:
                return article.id
            line = json.dumps(article.to_json(), ensure_ascii=False, sort_keys=True)
            try:
                offset = self._log_path.stat().st_size
                with open(self._log_path, "ab") as fh:
                    fh.write(line.encode("utf-8") + b"\n")
                with open(self._idx_path, "a", encoding="utf-8") as fh:
                    fh.write(f"{article.id}\t{offset}\n")
            except OSError as exc:
                raise StoreError(f"append failed: {exc}") from exc
            self._offsets[article.id] = offset
            return article.id

    def get(self, article_id: str) -> Article | None:
        offset = self._offsets.get(article_id)
        if offset is None:
            return None
        try:
            with open(self._log_path, "rb") as fh:
                fh.seek(offset)
                line = fh.readline().rstrip(b"\n")
        except OSError as exc:
            raise StoreError(f"read failed at offset {offset}: {exc}") from exc
        try:
            return Article.from_json(json.loads(line))
        except (ValueError, KeyError) as exc:
            raise StoreError(f"corrupt article log at offset {offset}: {exc}") from exc

    def scan(self) -> Iterator[Article]:
        """Yield stored articles in insertion order."""
        seen = 0
        limit = len(self._offsets)
        for _, _, article in self._iter_log():
            if seen >= limit:
                break
            seen += 1
            yield article
