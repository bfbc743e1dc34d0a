"""Desk-scale transformer credibility classifier with PGD adversarial training."""

from .model import (
    ModelConfig,
    ModelParameters,
    forward,
    gradient_check,
    loss_and_grad,
)
from .adversarial import PgdConfig, pgd_attack, pgd_step, attack_accuracy
from .metrics import (
    ConfusionCounts,
    EvalReport,
    TTestResult,
    accuracy,
    f1,
    mcc,
    ttest_independent,
)
from .train import (
    TrainConfig,
    TrainingDiverged,
    build_model_vocab,
    credibility_score,
    encode_text,
    evaluate,
    load_labeled_jsonl,
    split_dataset,
    train,
)
from .checkpoint import CheckpointError, checkpoint_digest, load_checkpoint, save_checkpoint

__all__ = [
    "ModelConfig",
    "ModelParameters",
    "forward",
    "gradient_check",
    "loss_and_grad",
    "PgdConfig",
    "pgd_attack",
    "pgd_step",
    "attack_accuracy",
    "ConfusionCounts",
    "EvalReport",
    "TTestResult",
    "accuracy",
    "f1",
    "mcc",
    "ttest_independent",
    "TrainConfig",
    "TrainingDiverged",
    "build_model_vocab",
    "credibility_score",
    "encode_text",
    "evaluate",
    "load_labeled_jsonl",
    "split_dataset",
    "train",
    "CheckpointError",
    "checkpoint_digest",
    "load_checkpoint",
    "save_checkpoint",
]
