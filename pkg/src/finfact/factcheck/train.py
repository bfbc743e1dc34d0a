"""Adam training loop, clean or adversarial, plus dataset plumbing.

Datasets are lists of (token ids, label) pairs. Text corpora go through the
shared tokenizer and a frequency-ranked vocabulary whose id 0 is reserved
for unknown tokens, so a trained model can score arbitrary text.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..textindex import TokenizerConfig, tokenize
from .adversarial import PgdConfig, pgd_attack
from .metrics import ConfusionCounts, EvalReport
from .model import (
    Batch,
    ModelConfig,
    ModelParameters,
    forward,
    loss_and_grad,
    predict,
)

UNK_TOKEN = "<unk>"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    adversarial: bool = False

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if self.adam_eps <= 0.0:
            raise ValueError("adam_eps must be positive")


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the 1-based epoch."""

    def __init__(self, epoch: int) -> None:
        super().__init__(f"training diverged: non-finite loss in epoch {epoch}")
        self.epoch = epoch


class _Adam:
    def __init__(self, params: ModelParameters, tc: TrainConfig) -> None:
        self.tc = tc
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.items()}

    def step(self, params: ModelParameters, grads: ModelParameters) -> None:
        tc = self.tc
        self.t += 1
        bias1 = 1.0 - tc.beta1 ** self.t
        bias2 = 1.0 - tc.beta2 ** self.t
        for name, g in grads.items():
            m, v = self.m[name], self.v[name]
            m *= tc.beta1
            m += (1.0 - tc.beta1) * g
            v *= tc.beta2
            v += (1.0 - tc.beta2) * g * g
            params.arrays[name] -= tc.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + tc.adam_eps)


def train(train_set: Batch, val_set: Batch, mc: ModelConfig, tc: TrainConfig,
          pc: PgdConfig | None = None):
    """Train and return (best-validation parameters, per-epoch history).

    Adversarial mode solves the inner maximization with PGD per batch and
    descends on the loss at the worst-case perturbation. The checkpoint with
    the highest validation accuracy wins; earlier epochs win ties.
    """
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    if len(val_set) == 0:
        raise ValueError("validation set is empty")
    attack_cfg = pc if pc is not None else PgdConfig()
    params = ModelParameters.init(mc)
    optimizer = _Adam(params, tc)
    rng = np.random.default_rng(tc.seed)
    best = params.copy()
    best_acc = -1.0
    history: list[dict] = []
    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(len(train_set))
        clean_losses: list[float] = []
        adv_losses: list[float] = []
        for start in range(0, len(order), tc.batch_size):
            batch = [train_set[i] for i in order[start : start + tc.batch_size]]
            if tc.adversarial:
                attack = pgd_attack(params, batch, attack_cfg)
                loss, grads, _ = loss_and_grad(params, batch, attack["delta"])
                clean_losses.append(attack["clean_loss"])
                adv_losses.append(loss)
            else:
                loss, grads, _ = loss_and_grad(params, batch)
                clean_losses.append(loss)
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch)
            optimizer.step(params, grads)
        val_acc = evaluate(params, val_set).accuracy
        record = {
            "epoch": epoch,
            "train_loss": sum(clean_losses) / len(clean_losses),
            "val_accuracy": val_acc,
        }
        if tc.adversarial:
            record["adv_loss"] = sum(adv_losses) / len(adv_losses)
        history.append(record)
        if val_acc > best_acc:
            best_acc = val_acc
            best = params.copy()
    return best, history


_EVAL_BATCH = 128


def evaluate(params: ModelParameters, dataset: Batch) -> EvalReport:
    """Confusion-count metrics of argmax predictions over a labeled set."""
    if len(dataset) == 0:
        raise ValueError("evaluation set is empty")
    preds: list[int] = []
    labels: list[int] = []
    for start in range(0, len(dataset), _EVAL_BATCH):
        chunk = dataset[start : start + _EVAL_BATCH]
        preds.extend(int(p) for p in predict(params, chunk))
        labels.extend(label for _, label in chunk)
    return EvalReport.from_counts(ConfusionCounts.from_pairs(preds, labels))


def build_model_vocab(texts: Sequence[str], tokenizer: TokenizerConfig = TokenizerConfig(),
                      max_vocab: int = 20000) -> list[str]:
    """Frequency-ranked token list; ties lexicographic; id 0 is the unknown slot."""
    if max_vocab < 2:
        raise ValueError("max_vocab must be at least 2")
    counts: Counter[str] = Counter()
    for text in texts:
        counts.update(tokenize(text, tokenizer))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [UNK_TOKEN] + [token for token, _ in ranked[: max_vocab - 1]]


def vocab_index(vocab: Sequence[str]) -> dict[str, int]:
    return {token: i for i, token in enumerate(vocab)}


def encode_text(text: str, index: dict[str, int], max_len: int,
                tokenizer: TokenizerConfig = TokenizerConfig()) -> list[int]:
    """Token ids for a text, unknowns mapped to id 0, truncated to max_len."""
    tokens = tokenize(text, tokenizer)
    if not tokens:
        raise ValueError("text produced no tokens")
    return [index.get(token, 0) for token in tokens[:max_len]]


def encode_dataset(rows: Sequence[tuple[str, int]], index: dict[str, int], max_len: int,
                   tokenizer: TokenizerConfig = TokenizerConfig()) -> list[tuple[list[int], int]]:
    return [(encode_text(text, index, max_len, tokenizer), label) for text, label in rows]


def load_labeled_jsonl(path: str | Path) -> list[tuple[str, int]]:
    """Read {text, label} JSON lines; label must be 0 or 1."""
    rows: list[tuple[str, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict) or "text" not in obj or "label" not in obj:
                raise ValueError(f"line {lineno}: expected an object with text and label")
            text, label = obj["text"], obj["label"]
            if not isinstance(text, str) or not text.strip():
                raise ValueError(f"line {lineno}: text must be a non-empty string")
            if label not in (0, 1):
                raise ValueError(f"line {lineno}: label must be 0 or 1")
            rows.append((text, int(label)))
    if not rows:
        raise ValueError("dataset file contains no rows")
    return rows


def split_dataset(rows: Sequence, seed: int,
                  fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)):
    """Deterministic shuffled train/validation/test split."""
    if not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ValueError("fractions must sum to 1")
    order = np.random.default_rng(seed).permutation(len(rows))
    n_train = int(len(rows) * fractions[0])
    n_val = int(len(rows) * fractions[1])
    train_rows = [rows[i] for i in order[:n_train]]
    val_rows = [rows[i] for i in order[n_train : n_train + n_val]]
    test_rows = [rows[i] for i in order[n_train + n_val :]]
    return train_rows, val_rows, test_rows


def credibility_score(params: ModelParameters, vocab: Sequence[str], text: str,
                      tokenizer: TokenizerConfig = TokenizerConfig()) -> float:
    """Positive-class probability for a text under a trained model."""
    ids = encode_text(text, vocab_index(vocab), params.config.max_len, tokenizer)
    probs, _ = forward(params, ids)
    return float(probs[1])
