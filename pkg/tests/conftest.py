"""Shared fixtures: glossary, bilingual article corpus, trained checkpoint."""

from __future__ import annotations

import json

import pytest

from finfact.factcheck.checkpoint import save_checkpoint
from finfact.factcheck.model import ModelConfig
from finfact.factcheck.train import (
    TrainConfig,
    build_model_vocab,
    encode_dataset,
    train,
    vocab_index,
)
from finfact.textindex import TokenizerConfig

GLOSSARY = {
    "美联储": "fed",
    "加息": "raises rates",
    "利率": "interest rates",
    "通胀": "inflation",
    "政策": "policy",
    "油价": "oil prices",
    "欧佩克": "opec",
    "原油": "crude",
    "减产": "output cut",
    "供应": "supply",
    "并购": "merger",
    "收购": "acquisition",
    "反垄断": "antitrust",
    "科技": "tech",
    "交易": "deal",
    "会计": "accounting",
    "欺诈": "fraud",
    "丑闻": "scandal",
    "审计": "audit",
    "咖啡": "coffee",
    "连锁": "chain",
    "银行": "bank",
    "破产": "bankruptcy",
    "挤兑": "deposit run",
    "监管": "regulator",
    "储户": "depositors",
    "汽车": "automaker",
    "电动车": "electric vehicles",
    "召回": "recall",
    "电池": "battery",
    "缺陷": "defect",
    "芯片": "semiconductor",
    "出口": "exports",
    "管制": "controls",
    "晶圆": "wafer",
    "制造": "manufacturing",
    "房地产": "property",
    "开发商": "developer",
    "违约": "default",
    "债券": "bond",
    "重组": "restructuring",
    "铜": "copper",
    "矿业": "mining",
    "罢工": "strike",
    "矿山": "mine",
    "工会": "union",
    "财报": "earnings",
    "利润": "profit",
    "季度": "quarterly",
    "营收": "revenue",
    "超预期": "beat forecasts",
}

# ten synthetic events: english keyword pool + chinese phrasing that the
# glossary maps onto the same keywords
TOPICS = [
    (["fed", "raises", "rates", "interest", "inflation", "policy"],
     ["美联储", "加息", "利率", "通胀", "政策"]),
    (["oil", "prices", "opec", "crude", "output", "supply"],
     ["油价", "欧佩克", "原油", "减产", "供应"]),
    (["merger", "acquisition", "antitrust", "tech", "deal", "regulators"],
     ["并购", "收购", "反垄断", "科技", "交易"]),
    (["accounting", "fraud", "scandal", "audit", "coffee", "chain"],
     ["会计", "欺诈", "丑闻", "审计", "咖啡", "连锁"]),
    (["bank", "bankruptcy", "deposit", "run", "regulator", "depositors"],
     ["银行", "破产", "挤兑", "监管", "储户"]),
    (["automaker", "electric", "vehicles", "recall", "battery", "defect"],
     ["汽车", "电动车", "召回", "电池", "缺陷"]),
    (["semiconductor", "exports", "controls", "wafer", "manufacturing", "chips"],
     ["芯片", "出口", "管制", "晶圆", "制造"]),
    (["property", "developer", "default", "bond", "restructuring", "debt"],
     ["房地产", "开发商", "违约", "债券", "重组"]),
    (["copper", "mining", "strike", "mine", "union", "workers"],
     ["铜", "矿业", "罢工", "矿山", "工会"]),
    (["earnings", "profit", "quarterly", "revenue", "beat", "forecasts"],
     ["财报", "利润", "季度", "营收", "超预期"]),
]

EN_SOURCES = ["reuters", "bloomberg", "ft", "wsj", "cnbc", "nikkei", "guardian"]
ZH_SOURCES = ["caixin", "sina", "xinhua"]


def make_bilingual_articles() -> list[dict]:
    """100 deterministic articles: 10 events x (7 English + 3 Chinese)."""
    articles = []
    for t, (keywords, zh_terms) in enumerate(TOPICS):
        for j, source in enumerate(EN_SOURCES):
            rotated = [keywords[(j + k) % len(keywords)] for k in range(3)]
            articles.append({
                "source": source,
                "language": "en",
                "published_at": f"2024-05-{1 + t:02d}T{6 + j:02d}:00:00Z",
                "title": " ".join(rotated) + f" update {j}",
                "body": " ".join(keywords) + " " + " ".join(keywords[:3])
                        + f" markets said en{t}x{j}",
                "url": f"https://example.com/{source}/{t}/{j}",
            })
        for j, source in enumerate(ZH_SOURCES):
            articles.append({
                "source": source,
                "language": "zh",
                "published_at": f"2024-05-{1 + t:02d}T{14 + j}:00:00Z",
                "title": " ".join(zh_terms[:3]) + f" 周三 {j}",
                "body": " ".join(zh_terms) + " " + " ".join(zh_terms[:2])
                        + f" 周三 zh{t}x{j}",
                "url": f"https://example.cn/{source}/{t}/{j}",
            })
    assert len(articles) == 100
    return articles


def make_labeled_rows() -> list[dict]:
    """Balanced text/label rows with vocabulary that separates the classes."""
    credible = ["confirmed", "official", "filing", "statement", "audited",
                "regulator", "report", "disclosed"]
    doubtful = ["rumor", "anonymous", "unverified", "viral", "hoax",
                "fabricated", "clickbait", "leak"]
    fillers = ["market", "shares", "company", "quarter", "analyst", "trading"]
    rows = []
    for i in range(80):
        pool = credible if i % 2 else doubtful
        words = [pool[(i + k) % len(pool)] for k in range(4)]
        words += [fillers[(i + k) % len(fillers)] for k in range(3)]
        rows.append({"text": " ".join(words) + f" item{i}", "label": i % 2})
    return rows


@pytest.fixture(scope="session")
def glossary_file(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("glossary") / "finance.tsv"
    path.write_text(
        "".join(f"{src}\t{dst}\n" for src, dst in GLOSSARY.items()),
        encoding="utf-8",
    )
    return str(path)


@pytest.fixture(scope="session")
def bilingual_payload() -> str:
    return "\n".join(json.dumps(a, ensure_ascii=False) for a in make_bilingual_articles())


@pytest.fixture(scope="session")
def labeled_file(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("labeled") / "claims.jsonl"
    path.write_text(
        "\n".join(json.dumps(r) for r in make_labeled_rows()), encoding="utf-8"
    )
    return str(path)


@pytest.fixture(scope="session")
def trained_checkpoint(tmp_path_factory) -> str:
    """A small trained model checkpoint shared by server/CLI/engine tests."""
    rows = [(r["text"], r["label"]) for r in make_labeled_rows()]
    tokenizer = TokenizerConfig()
    vocab = build_model_vocab([t for t, _ in rows], tokenizer)
    mc = ModelConfig(vocab_size=len(vocab), max_len=16, seed=0)
    dataset = encode_dataset(rows, vocab_index(vocab), mc.max_len, tokenizer)
    tc = TrainConfig(epochs=4, batch_size=16, learning_rate=5e-3, seed=0)
    params, _ = train(dataset[:64], dataset[64:], mc, tc)
    path = tmp_path_factory.mktemp("ckpt") / "model.ffck"
    save_checkpoint(path, params, vocab, meta={"tokenizer": {
        "lowercase": tokenizer.lowercase,
        "cjk_mode": tokenizer.cjk_mode,
        "min_token_len": tokenizer.min_token_len,
    }})
    return str(path)
