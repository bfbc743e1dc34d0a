"""Projected gradient descent on the embedding inputs.

The perturbation lives in embedding space, starts at zero, and is clipped to
an L-infinity ball after every ascent step. The attack returns the iterate
with the highest loss, so adversarial loss can never fall below clean loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Batch, ModelParameters, batch_loss, encode_batch, loss_and_grad, _forward_batch


@dataclass(frozen=True)
class PgdConfig:
    # epsilon 0 is legal: the ball degenerates to a point and the attack
    # returns the clean loss
    epsilon: float = 0.05
    alpha: float = 0.0125
    n_iter: int = 4

    def __post_init__(self) -> None:
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if self.n_iter < 1:
            raise ValueError("n_iter must be at least 1")


def pgd_step(delta: np.ndarray, grad: np.ndarray, config: PgdConfig) -> np.ndarray:
    """One ascent step: delta + alpha * sign(grad), clipped to [-eps, eps]."""
    return np.clip(delta + config.alpha * np.sign(grad), -config.epsilon, config.epsilon)


def pgd_attack(params: ModelParameters, batch: Batch, config: PgdConfig) -> dict:
    """Best-iterate PGD over a batch.

    Only real-token positions are perturbed; padding stays exactly zero.
    Returns the winning perturbation together with clean and adversarial loss.
    """
    ids, mask, _ = encode_batch(params.config, batch)
    b, t = ids.shape
    dtype = params.dtype
    fmask = mask.astype(dtype)[:, :, None]

    delta = np.zeros((b, t, params.config.d_model), dtype=dtype)
    clean_loss = batch_loss(params, batch)
    best_loss = clean_loss
    best_delta = delta.copy()
    for _ in range(config.n_iter):
        _, _, ddelta = loss_and_grad(params, batch, delta, with_param_grads=False)
        delta = pgd_step(delta, ddelta, config).astype(dtype) * fmask
        loss = batch_loss(params, batch, delta)
        if loss > best_loss:
            best_loss = loss
            best_delta = delta.copy()
    return {
        "delta": best_delta,
        "adv_loss": best_loss,
        "clean_loss": clean_loss,
    }


def attack_accuracy(params: ModelParameters, batch: Batch, config: PgdConfig) -> dict:
    """Accuracy on clean inputs and under the PGD perturbation."""
    ids, mask, labels = encode_batch(params.config, batch)
    clean_probs = _forward_batch(params, ids, mask)["probs"]
    clean_pred = np.where(clean_probs[:, 1] >= clean_probs[:, 0], 1, 0)
    attack = pgd_attack(params, batch, config)
    adv_probs = _forward_batch(params, ids, mask, attack["delta"])["probs"]
    adv_pred = np.where(adv_probs[:, 1] >= adv_probs[:, 0], 1, 0)
    return {
        "clean_accuracy": float((clean_pred == labels).mean()),
        "adv_accuracy": float((adv_pred == labels).mean()),
        "clean_loss": attack["clean_loss"],
        "adv_loss": attack["adv_loss"],
        "n": int(labels.size),
    }
