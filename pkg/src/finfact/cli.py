"""Operator command line for every pipeline stage.

stdout carries machine-readable JSON only (one object, or one object per
line for ranked search); diagnostics go to stderr. Exit codes: 0 success,
1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .corpus import ConfigError, ParseError, StoreError, TranslationError
from .engine import NewsEngine
from .events import ClustererConfig
from .factcheck.adversarial import PgdConfig, attack_accuracy
from .factcheck.checkpoint import (
    CheckpointError,
    checkpoint_digest,
    load_checkpoint,
    save_checkpoint,
)
from .factcheck.metrics import ConfusionCounts, EvalReport, ttest_independent
from .factcheck.model import ModelConfig, gradcheck_instance, gradient_check
from .factcheck.train import (
    TrainConfig,
    TrainingDiverged,
    build_model_vocab,
    encode_dataset,
    evaluate,
    load_labeled_jsonl,
    split_dataset,
    train,
    vocab_index,
)
from .server import ServerConfig
from .textindex import SearchWeights, TokenizerConfig

GRADCHECK_TOL_DOUBLE = 1e-6
GRADCHECK_TOL_SINGLE = 1e-4


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _engine_from_args(args) -> NewsEngine:
    translator = None
    if getattr(args, "translate", None):
        config = ServerConfig(
            store_dir=args.store,
            translate=args.translate,
            glossary=getattr(args, "glossary", None),
            translate_endpoint=getattr(args, "endpoint", None),
            translate_cache=getattr(args, "cache", None),
        )
        translator = config.build_translator()
    return NewsEngine(
        store_dir=args.store,
        clusterer=ClustererConfig(
            tau=getattr(args, "tau", 0.30),
            k_hashtags=getattr(args, "k_hashtags", 5),
        ),
        weights=SearchWeights(
            getattr(args, "w_hashtag", 2.0), getattr(args, "w_content", 1.0)
        ),
        translator=translator,
    )


def cmd_ingest(args) -> int:
    engine = _engine_from_args(args)
    result = engine.ingest(Path(args.input).read_bytes())
    _emit(result)
    return 0


def cmd_cluster(args) -> int:
    engine = _engine_from_args(args)
    snapshot = engine.snapshot
    _emit({
        "events": len(snapshot.state.clusters),
        "clusters": [
            {
                "event_id": c.event_id,
                "size": len(c.members),
                "hashtags": list(c.hashtags),
            }
            for c in snapshot.state.clusters
        ],
        "assignments": dict(sorted(snapshot.state.assignments.items())),
    })
    return 0


def cmd_search(args) -> int:
    if not args.query.strip():
        print("usage: finfact search requires a non-empty --query", file=sys.stderr)
        return 1
    engine = _engine_from_args(args)
    result = engine.search(args.query, limit=args.limit)
    ranked = [a for group in result["groups"] for a in group["articles"]]
    ranked.sort(key=lambda a: (-a["score"], a["article_id"]))
    for hit in ranked:
        event_id = next(
            g["event_id"] for g in result["groups"]
            if any(a["article_id"] == hit["article_id"] for a in g["articles"])
        )
        _emit({**hit, "event_id": event_id})
    return 0


def cmd_train(args) -> int:
    rows = load_labeled_jsonl(args.data)
    tokenizer = TokenizerConfig()
    vocab = build_model_vocab([text for text, _ in rows], tokenizer, args.max_vocab)
    mc = ModelConfig(
        vocab_size=len(vocab),
        d_model=args.d_model,
        n_heads=args.n_heads,
        n_layers=args.n_layers,
        d_ff=args.d_ff,
        max_len=args.max_len,
        seed=args.seed,
    )
    dataset = encode_dataset(rows, vocab_index(vocab), mc.max_len, tokenizer)
    train_set, val_set, test_set = split_dataset(dataset, seed=args.seed)
    tc = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        adversarial=args.adversarial,
    )
    pc = PgdConfig(epsilon=args.epsilon, alpha=args.alpha, n_iter=args.steps)
    params, history = train(train_set, val_set, mc, tc, pc)
    meta = {
        "tokenizer": asdict(tokenizer),
        "train_config": {
            "epochs": tc.epochs,
            "batch_size": tc.batch_size,
            "learning_rate": tc.learning_rate,
            "seed": tc.seed,
            "adversarial": tc.adversarial,
            "epsilon": pc.epsilon,
            "alpha": pc.alpha,
            "steps": pc.n_iter,
        },
    }
    save_checkpoint(args.out, params, vocab, meta)
    result = {
        "history": history,
        "checkpoint": str(args.out),
        "model_version": checkpoint_digest(args.out),
    }
    if test_set:
        result["test"] = evaluate(params, test_set).to_json()
    _emit(result)
    return 0


def _load_predictions(path: str) -> ConfusionCounts:
    preds: list[int] = []
    labels: list[int] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "prediction" not in obj or "label" not in obj:
                raise ValueError(f"line {lineno}: expected prediction and label keys")
            preds.append(int(obj["prediction"]))
            labels.append(int(obj["label"]))
    return ConfusionCounts.from_pairs(preds, labels)


def cmd_eval(args) -> int:
    if args.ckpt is None:
        report = EvalReport.from_counts(_load_predictions(args.data))
    else:
        params, vocab, meta = load_checkpoint(args.ckpt)
        tokenizer = TokenizerConfig(**meta.get("tokenizer", {}))
        rows = load_labeled_jsonl(args.data)
        dataset = encode_dataset(rows, vocab_index(vocab), params.config.max_len, tokenizer)
        report = evaluate(params, dataset)
    _emit(report.to_json())
    return 0


def cmd_gradcheck(args) -> int:
    dtype = np.float32 if args.single else np.float64
    params, batch = gradcheck_instance(
        d_model=args.d_model,
        n_layers=args.layers,
        batch_size=args.batch,
        seed=args.seed,
        dtype=dtype,
    )
    report = gradient_check(
        params, batch,
        fd_epsilon=args.fd_epsilon,
        n_samples=args.samples,
        seed=args.seed,
    )
    tolerance = args.tolerance
    if tolerance is None:
        tolerance = GRADCHECK_TOL_SINGLE if args.single else GRADCHECK_TOL_DOUBLE
    _emit({**report, "tolerance": tolerance})
    if report["max_rel_err"] >= tolerance:
        print(f"gradcheck failed: {report['max_rel_err']:.3e} >= {tolerance:.1e}",
              file=sys.stderr)
        return 2
    return 0


def cmd_attack_eval(args) -> int:
    params, vocab, meta = load_checkpoint(args.ckpt)
    tokenizer = TokenizerConfig(**meta.get("tokenizer", {}))
    rows = load_labeled_jsonl(args.data)
    dataset = encode_dataset(rows, vocab_index(vocab), params.config.max_len, tokenizer)
    pc = PgdConfig(epsilon=args.epsilon, alpha=args.alpha, n_iter=args.steps)
    _emit(attack_accuracy(params, dataset, pc))
    return 0


def _load_scores(path: str) -> list[float]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
        if not isinstance(data, list):
            raise ValueError(f"{path}: expected a JSON array of numbers")
        return [float(x) for x in data]
    except json.JSONDecodeError:
        return [float(line) for line in text.splitlines() if line.strip()]


def cmd_ttest(args) -> int:
    result = ttest_independent(_load_scores(args.a), _load_scores(args.b))
    _emit(result.to_json())
    return 0


def cmd_serve(args) -> int:
    from .server import run

    run(ServerConfig.from_file(args.config))
    return 0


def _add_store_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--store", required=True, help="article store directory")
    sub.add_argument("--tau", type=float, default=0.30)
    sub.add_argument("--k-hashtags", type=int, default=5, dest="k_hashtags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finfact",
        description="event-clustered financial news aggregation and credibility scoring",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, translate, store and cluster articles")
    _add_store_flags(p)
    p.add_argument("--input", required=True, help="line-delimited JSON articles")
    p.add_argument("--translate", choices=["glossary", "remote"], default=None)
    p.add_argument("--glossary", help="tab-separated glossary file")
    p.add_argument("--endpoint", help="remote translator URL")
    p.add_argument("--cache", help="translation cache file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("cluster", help="rebuild clusters and print the event summary")
    _add_store_flags(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("search", help="ranked hashtag+content search")
    _add_store_flags(p)
    p.add_argument("--query", required=True)
    p.add_argument("--w-hashtag", type=float, default=2.0, dest="w_hashtag")
    p.add_argument("--w-content", type=float, default=1.0, dest="w_content")
    p.add_argument("--limit", type=int, default=20)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("train", help="train a credibility classifier")
    p.add_argument("--data", required=True, help="JSONL of {text, label}")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=32, dest="batch_size")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--adversarial", action="store_true")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--alpha", type=float, default=0.0125)
    p.add_argument("--steps", type=int, default=4)
    p.add_argument("--d-model", type=int, default=32, dest="d_model")
    p.add_argument("--n-heads", type=int, default=2, dest="n_heads")
    p.add_argument("--n-layers", type=int, default=2, dest="n_layers")
    p.add_argument("--d-ff", type=int, default=64, dest="d_ff")
    p.add_argument("--max-len", type=int, default=64, dest="max_len")
    p.add_argument("--max-vocab", type=int, default=20000, dest="max_vocab")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or a predictions file")
    p.add_argument("--ckpt", default=None)
    p.add_argument("--data", required=True,
                   help="JSONL of {text, label}, or {prediction, label} without --ckpt")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the backward pass")
    p.add_argument("--d-model", type=int, default=16, dest="d_model")
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--seed", type=int, default=6)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--fd-epsilon", type=float, default=1e-3, dest="fd_epsilon")
    p.add_argument("--single", action="store_true", help="check in float32")
    p.add_argument("--tolerance", type=float, default=None)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("attack-eval", help="clean vs adversarial accuracy of a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--alpha", type=float, default=0.0125)
    p.add_argument("--steps", type=int, default=4)
    p.set_defaults(func=cmd_attack_eval)

    p = sub.add_parser("ttest", help="two-sample equal-variance significance test")
    p.add_argument("--a", required=True, help="scores file (JSON array or one float per line)")
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_ttest)

    p = sub.add_parser("serve", help="run the HTTP API server")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; the contract reserves 2 for
        # runtime failures
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ParseError, ConfigError, StoreError, TranslationError, CheckpointError,
            TrainingDiverged, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
