"""Shared builders for toy scorers used across the test suite."""

from __future__ import annotations

import random

import numpy as np

from genloop import TableModel, Vocabulary


def make_table_model(seed: int, words: list[str], n_rows: int = 7,
                     multiplier: int = 31) -> TableModel:
    """Seeded random table model over the given surface words."""
    vocab = Vocabulary(("<bos>", "<eos>", "<unk>", *words))
    rng = random.Random(seed)
    rows = []
    for _ in range(n_rows):
        raw = np.array([rng.uniform(0.2, 4.0) for _ in range(len(vocab))])
        probs = raw / raw.sum()
        logp = np.log(probs)
        # renormalize in log space so exp-sums are 1 to float precision
        logp -= np.log(np.exp(logp).sum())
        rows.append(logp)
    return TableModel(vocab, np.array(rows), multiplier=multiplier)
