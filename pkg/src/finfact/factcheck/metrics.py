"""Binary classification metrics and the paired-run significance test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy.special import betainc


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        for name in ("tp", "tn", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_pairs(cls, predictions: Sequence[int], labels: Sequence[int]) -> "ConfusionCounts":
        if len(predictions) != len(labels):
            raise ValueError("predictions and labels differ in length")
        tp = tn = fp = fn = 0
        for pred, label in zip(predictions, labels):
            if pred not in (0, 1) or label not in (0, 1):
                raise ValueError("predictions and labels must be 0 or 1")
            if pred == 1 and label == 1:
                tp += 1
            elif pred == 0 and label == 0:
                tn += 1
            elif pred == 1 and label == 0:
                fp += 1
            else:
                fn += 1
        return cls(tp=tp, tn=tn, fp=fp, fn=fn)


def accuracy(counts: ConfusionCounts) -> float:
    if counts.total == 0:
        raise ValueError("no observations")
    return (counts.tp + counts.tn) / counts.total


def f1(counts: ConfusionCounts) -> float:
    """F1 for the positive class; 0 when the denominator vanishes."""
    denom = 2 * counts.tp + counts.fp + counts.fn
    if denom == 0:
        return 0.0
    return 2 * counts.tp / denom


def mcc(counts: ConfusionCounts) -> float:
    """Matthews correlation; defined as 0 when any marginal is empty."""
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    product = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if product == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(product)


@dataclass(frozen=True)
class EvalReport:
    counts: ConfusionCounts
    accuracy: float
    f1: float
    mcc: float

    @classmethod
    def from_counts(cls, counts: ConfusionCounts) -> "EvalReport":
        return cls(counts=counts, accuracy=accuracy(counts), f1=f1(counts), mcc=mcc(counts))

    def to_json(self) -> dict:
        return {
            "tp": self.counts.tp,
            "tn": self.counts.tn,
            "fp": self.counts.fp,
            "fn": self.counts.fn,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "mcc": self.mcc,
        }


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    p_value: float
    df: int
    mean_a: float
    mean_b: float

    def to_json(self) -> dict:
        return {
            "t_statistic": self.t_statistic,
            "p_value": self.p_value,
            "df": self.df,
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
        }


def ttest_independent(sample_a: Sequence[float], sample_b: Sequence[float]) -> TTestResult:
    """Two-sided equal-variance t-test for independent samples.

    The two-sided p-value comes from the regularized incomplete beta
    function: p = I(df / (df + t^2); df/2, 1/2).
    """
    na, nb = len(sample_a), len(sample_b)
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least two observations")
    mean_a = sum(sample_a) / na
    mean_b = sum(sample_b) / nb
    ss_a = sum((x - mean_a) ** 2 for x in sample_a)
    ss_b = sum((x - mean_b) ** 2 for x in sample_b)
    df = na + nb - 2
    pooled = (ss_a + ss_b) / df
    if pooled == 0.0:
        raise ValueError("zero variance: both samples are constant")
    t_stat = (mean_a - mean_b) / math.sqrt(pooled * (1.0 / na + 1.0 / nb))
    p_value = float(betainc(df / 2.0, 0.5, df / (df + t_stat * t_stat)))
    return TTestResult(t_statistic=t_stat, p_value=p_value, df=df,
                       mean_a=mean_a, mean_b=mean_b)
