"""Parsing, dedup ids, translation, and the append-only article store."""

from __future__ import annotations

import json
from datetime import datetime, timezone

import pytest

from finfact.corpus import (
    Article,
    ArticleStore,
    ConfigError,
    ParseError,
    TranslationError,
    Translator,
    TranslatorConfig,
    articles_from_objects,
    compute_id,
    dedup_key,
    parse_articles,
    parse_timestamp,
    pivot,
)

GOOD = {
    "source": "reuters",
    "language": "en",
    "published_at": "2024-03-01T12:00:00Z",
    "title": "Fed raises rates",
    "body": "The Federal Reserve raised interest rates.",
    "url": "https://example.com/1",
}


def _lines(*objs) -> str:
    return "\n".join(json.dumps(o, ensure_ascii=False) for o in objs)


class TestParsing:
    def test_single_article(self):
        (a,) = parse_articles(_lines(GOOD))
        assert a.source == "reuters"
        assert a.language == "en"
        assert a.title == "Fed raises rates"
        assert a.published_at == datetime(2024, 3, 1, 12, tzinfo=timezone.utc)
        assert a.url == "https://example.com/1"
        assert a.id == dedup_key(a)

    def test_bytes_and_str_agree(self):
        text = _lines(GOOD)
        assert parse_articles(text) == parse_articles(text.encode("utf-8"))

    def test_blank_lines_skipped(self):
        assert len(parse_articles(_lines(GOOD) + "\n\n\n")) == 1

    def test_array_payload(self):
        arts = articles_from_objects([GOOD, dict(GOOD, title="Other title")])
        assert len(arts) == 2 and arts[0].id != arts[1].id

    @pytest.mark.parametrize("key", ["source", "language", "published_at", "title", "body"])
    def test_missing_key_is_named(self, key):
        bad = {k: v for k, v in GOOD.items() if k != key}
        with pytest.raises(ParseError, match=f"line 1.*'{key}'"):
            parse_articles(_lines(bad))

    def test_error_names_offending_line(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_articles(_lines(GOOD, {"source": "x"}))

    def test_invalid_json_line(self):
        with pytest.raises(ParseError, match="line 1: invalid JSON"):
            parse_articles("{not json")

    def test_unknown_language_rejected(self):
        with pytest.raises(ParseError, match="language"):
            parse_articles(_lines(dict(GOOD, language="xx")))

    def test_empty_title_rejected(self):
        with pytest.raises(ParseError, match="title"):
            parse_articles(_lines(dict(GOOD, title="   ")))

    def test_bad_timestamp_rejected(self):
        with pytest.raises(ParseError, match="published_at"):
            parse_articles(_lines(dict(GOOD, published_at="yesterday")))


class TestTimestamps:
    def test_z_suffix_equals_offset(self):
        assert parse_timestamp("2024-03-01T12:00:00Z") == parse_timestamp(
            "2024-03-01T12:00:00+00:00"
        )

    def test_other_zone_converted_to_utc(self):
        dt = parse_timestamp("2024-03-01T20:00:00+08:00")
        assert dt == datetime(2024, 3, 1, 12, tzinfo=timezone.utc)

    def test_naive_assumed_utc(self):
        dt = parse_timestamp("2024-03-01T12:00:00")
        assert dt.tzinfo == timezone.utc

    def test_subsecond_precision_dropped(self):
        assert parse_timestamp("2024-03-01T12:00:00.987Z").microsecond == 0


class TestDedupId:
    # sha256 of "reuters" + NUL + "fed raises rates" + NUL + "2020-01-02",
    # computed independently with hashlib on the canonical string
    FROZEN = "c17022eebee87fc1ec02e6f2b895622a79efc54b46ec5c836460015f1f708847"

    def test_known_digest(self):
        dt = datetime(2020, 1, 2, 15, 30, tzinfo=timezone.utc)
        assert compute_id("reuters", "Fed  Raises   Rates", dt) == self.FROZEN

    def test_case_and_whitespace_insensitive(self):
        dt = datetime(2020, 1, 2, tzinfo=timezone.utc)
        assert compute_id("reuters", "fed raises rates", dt) == self.FROZEN
        assert compute_id("reuters", "  FED RAISES RATES  ", dt) == self.FROZEN

    def test_time_of_day_ignored_date_kept(self):
        early = datetime(2020, 1, 2, 0, 1, tzinfo=timezone.utc)
        late = datetime(2020, 1, 2, 23, 59, tzinfo=timezone.utc)
        other_day = datetime(2020, 1, 3, 0, 1, tzinfo=timezone.utc)
        assert compute_id("reuters", "t", early) == compute_id("reuters", "t", late)
        assert compute_id("reuters", "t", early) != compute_id("reuters", "t", other_day)

    def test_source_distinguishes(self):
        dt = datetime(2020, 1, 2, tzinfo=timezone.utc)
        assert compute_id("reuters", "t", dt) != compute_id("bloomberg", "t", dt)

    def test_body_excluded(self):
        a = parse_articles(_lines(GOOD))[0]
        b = parse_articles(_lines(dict(GOOD, body="entirely different text")))[0]
        assert a.id == b.id


class TestGlossaryTranslator:
    @pytest.fixture()
    def translator(self, glossary_file):
        return Translator(TranslatorConfig(mode="glossary-stub", glossary_path=glossary_file))

    def test_single_term(self, translator):
        assert translator.translate("咖啡", "zh", "en") == "coffee"

    def test_sentence(self, translator):
        assert translator.translate("美联储 加息", "zh", "en") == "fed raises rates"

    def test_unspaced_longest_match(self, translator):
        # greedy segmentation picks 美联储 over any shorter prefix
        assert translator.translate("美联储加息", "zh", "en") == "fed raises rates"

    def test_unknown_cjk_passes_through_by_char(self, translator):
        out = translator.translate("美联储蝴蝶", "zh", "en")
        assert out == "fed 蝴 蝶"

    def test_non_cjk_tokens_untouched(self, translator):
        assert translator.translate("IPO 咖啡 2024", "zh", "en") == "IPO coffee 2024"

    def test_same_language_rejected(self, translator):
        with pytest.raises(ValueError):
            translator.translate("text", "en", "en")

    def test_empty_text(self, translator):
        assert translator.translate("", "zh", "en") == ""

    def test_missing_glossary_file(self, tmp_path):
        cfg = TranslatorConfig(mode="glossary-stub", glossary_path=tmp_path / "nope.tsv")
        with pytest.raises(ConfigError):
            Translator(cfg)

    def test_mode_requires_glossary_path(self):
        with pytest.raises(ConfigError):
            TranslatorConfig(mode="glossary-stub")


class TestRemoteTranslator:
    def _translator(self, transport, tmp_path=None, cache=False):
        cfg = TranslatorConfig(
            mode="remote",
            endpoint="https://translate.test/v1",
            cache_path=(tmp_path / "cache.jsonl") if cache else None,
        )
        return Translator(cfg, transport=transport, backoff_base=0.0)

    def test_success_and_cache_hit(self):
        calls = []

        def transport(endpoint, payload, api_key, timeout):
            calls.append(payload["text"])
            return 200, {"text": payload["text"].upper()}

        tr = self._translator(transport)
        assert tr.translate("hola", "es", "en") == "HOLA"
        assert tr.translate("hola", "es", "en") == "HOLA"
        assert calls == ["hola"]  # second lookup served from cache

    def test_cache_keyed_by_direction(self):
        calls = []

        def transport(endpoint, payload, api_key, timeout):
            calls.append((payload["src"], payload["dst"]))
            return 200, {"text": "ok"}

        tr = self._translator(transport)
        tr.translate("hola", "es", "en")
        tr.translate("hola", "es", "fr")
        assert len(calls) == 2

    def test_retry_then_success(self):
        statuses = iter([500, 200])

        def transport(endpoint, payload, api_key, timeout):
            status = next(statuses)
            return status, {"text": "ok"} if status == 200 else {}

        assert self._translator(transport).translate("x", "es", "en") == "ok"

    def test_failure_carries_status(self):
        def transport(endpoint, payload, api_key, timeout):
            return 503, {}

        with pytest.raises(TranslationError) as err:
            self._translator(transport).translate("x", "es", "en")
        assert err.value.status == 503

    def test_cache_file_survives_restart(self, tmp_path):
        calls = []

        def transport(endpoint, payload, api_key, timeout):
            calls.append(1)
            return 200, {"text": "cached"}

        self._translator(transport, tmp_path, cache=True).translate("x", "es", "en")
        fresh = self._translator(transport, tmp_path, cache=True)
        assert fresh.translate("x", "es", "en") == "cached"
        assert len(calls) == 1

    def test_remote_requires_endpoint(self):
        with pytest.raises(ConfigError):
            TranslatorConfig(mode="remote")


class TestPivot:
    def test_english_unchanged(self, glossary_file):
        tr = Translator(TranslatorConfig(mode="glossary-stub", glossary_path=glossary_file))
        a = parse_articles(_lines(GOOD))[0]
        assert pivot(a, tr) is a

    def test_chinese_filled_and_idempotent(self, glossary_file):
        tr = Translator(TranslatorConfig(mode="glossary-stub", glossary_path=glossary_file))
        zh = dict(GOOD, language="zh", title="美联储 加息", body="咖啡 连锁")
        a = pivot(parse_articles(_lines(zh))[0], tr)
        assert a.pivot_title == "fed raises rates"
        assert a.pivot_body == "coffee chain"
        assert pivot(a, tr) is a
        assert a.pivot_text() == "fed raises rates\ncoffee chain"

    def test_pivot_text_defaults_to_original(self):
        a = parse_articles(_lines(GOOD))[0]
        assert a.pivot_text() == f"{GOOD['title']}\n{GOOD['body']}"


class TestArticleStore:
    def _articles(self, n=3):
        return parse_articles(
            _lines(*(dict(GOOD, title=f"Story {i}") for i in range(n)))
        )

    def test_append_get_roundtrip(self, tmp_path):
        store = ArticleStore(tmp_path)
        (a,) = parse_articles(_lines(GOOD))
        store.append(a)
        assert store.get(a.id) == a
        assert a.id in store and len(store) == 1

    def test_duplicate_append_is_noop(self, tmp_path):
        store = ArticleStore(tmp_path)
        (a,) = parse_articles(_lines(GOOD))
        assert store.append(a) == store.append(a)
        assert len(store) == 1

    def test_scan_preserves_insertion_order(self, tmp_path):
        store = ArticleStore(tmp_path)
        arts = self._articles(5)
        for a in arts:
            store.append(a)
        assert [a.id for a in store.scan()] == [a.id for a in arts]

    def test_reopen_sees_same_content(self, tmp_path):
        arts = self._articles(3)
        store = ArticleStore(tmp_path)
        for a in arts:
            store.append(a)
        reopened = ArticleStore(tmp_path)
        assert len(reopened) == 3
        assert [a.id for a in reopened.scan()] == [a.id for a in arts]

    def test_index_rebuilt_after_deletion(self, tmp_path):
        arts = self._articles(3)
        store = ArticleStore(tmp_path)
        for a in arts:
            store.append(a)
        (tmp_path / ArticleStore.IDX_NAME).unlink()
        reopened = ArticleStore(tmp_path)
        assert [a.id for a in reopened.scan()] == [a.id for a in arts]
        assert reopened.get(arts[1].id) == arts[1]

    def test_missing_id_returns_none(self, tmp_path):
        assert ArticleStore(tmp_path).get("0" * 64) is None

    def test_unicode_roundtrip(self, tmp_path):
        store = ArticleStore(tmp_path)
        zh = dict(GOOD, language="zh", title="美联储 加息 市场波动")
        (a,) = parse_articles(_lines(zh))
        store.append(a)
        assert ArticleStore(tmp_path).get(a.id).title == "美联储 加息 市场波动"


class TestArticleJson:
    def test_roundtrip(self):
        (a,) = parse_articles(_lines(GOOD))
        assert Article.from_json(a.to_json()) == a

    def test_optional_fields_omitted(self):
        (a,) = parse_articles(_lines({k: v for k, v in GOOD.items() if k != "url"}))
        obj = a.to_json()
        assert "url" not in obj and "pivot_title" not in obj
