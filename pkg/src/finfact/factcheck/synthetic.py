"""Synthetic token datasets for training and robustness evaluation.

The indicative-token generator plants a handful of class-specific tokens in
every example and fills the rest with uniform noise drawn away from both
indicator sets, so the class signal is unambiguous but diluted.
"""

from __future__ import annotations

import numpy as np

N_INDICATIVE = 4

_CLASS0_TOKENS = tuple(range(0, N_INDICATIVE))
_CLASS1_TOKENS = tuple(range(N_INDICATIVE, 2 * N_INDICATIVE))


def make_indicative_dataset(n_examples: int, seed: int, vocab_size: int = 200,
                            seq_len: int = 32) -> list[tuple[list[int], int]]:
    """Balanced (token ids, label) pairs with 4 indicator tokens per example."""
    if n_examples < 2 or n_examples % 2 != 0:
        raise ValueError("n_examples must be a positive even number")
    if vocab_size <= 2 * N_INDICATIVE:
        raise ValueError("vocab_size leaves no room for noise tokens")
    if seq_len < N_INDICATIVE:
        raise ValueError("seq_len must fit the indicative tokens")
    rng = np.random.default_rng(seed)
    noise_low = 2 * N_INDICATIVE
    dataset: list[tuple[list[int], int]] = []
    for i in range(n_examples):
        label = i % 2
        indicators = _CLASS1_TOKENS if label == 1 else _CLASS0_TOKENS
        noise = rng.integers(noise_low, vocab_size, size=seq_len - N_INDICATIVE)
        tokens = np.concatenate([np.array(indicators, dtype=np.int64), noise])
        rng.shuffle(tokens)
        dataset.append(([int(t) for t in tokens], label))
    return dataset


def make_separable_dataset(n_examples: int, seed: int,
                           seq_len: int = 6) -> list[tuple[list[int], int]]:
    """Trivially separable two-token corpus: every token names the label."""
    if n_examples < 2 or n_examples % 2 != 0:
        raise ValueError("n_examples must be a positive even number")
    rng = np.random.default_rng(seed)
    dataset: list[tuple[list[int], int]] = []
    for i in range(n_examples):
        label = i % 2
        length = int(rng.integers(1, seq_len + 1))
        dataset.append(([label] * length, label))
    return dataset
