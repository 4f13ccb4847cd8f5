"""Validity critics and pool filtering.

The trainable reference critic is an L2-regularized logistic regression
over hashed word 1-2-gram and character 3-5-gram counts: deterministic,
trains in seconds on CPU, and exposes a calibrated [0, 1] score. For
synthetic benchmarks there is also ``OracleCritic``, which wraps any
exact membership predicate and scores 1.0 / 0.0 -- it makes loop
improvement claims checkable without human labels.

Filtering keeps generations whose score is strictly above the threshold,
so an oracle's hard zeros are always dropped and (because a sigmoid is
strictly positive) the trained critic passes everything at delta = 0.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator

import numpy as np
from scipy import optimize, sparse

from .decoder import Generation
from .errors import InputError
from .text import tokenize

_VALID_LABELS = {"valid", "true"}
_INVALID_LABELS = {"invalid", "false", "don't know", "dont know", "garbled"}


@dataclass(frozen=True)
class LabeledExample:
    text: str
    valid: bool

    @classmethod
    def from_tsv(cls, line: str) -> "LabeledExample":
        text, _, label = line.rstrip("\n").partition("\t")
        label = label.strip().lower()
        if label in _VALID_LABELS:
            return cls(text, True)
        if label in _INVALID_LABELS:
            return cls(text, False)
        raise InputError(f"unknown label {label!r} (expected valid/invalid)")


def read_labeled_tsv(lines: Iterable[str]) -> list[LabeledExample]:
    out = []
    for lineno, raw in enumerate(lines, 1):
        if not raw.strip():
            continue
        try:
            out.append(LabeledExample.from_tsv(raw))
        except InputError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
    return out


@dataclass(frozen=True)
class FeatureSpec:
    dim: int = 1 << 15
    word_ngrams: tuple[int, int] = (1, 2)
    char_ngrams: tuple[int, int] = (3, 5)


def _features(text: str, spec: FeatureSpec) -> dict[int, float]:
    """Hashed n-gram counts, L2-normalized. CRC32 keeps hashing stable across runs."""
    counts: dict[int, float] = {}

    def bump(key: str):
        idx = zlib.crc32(key.encode("utf-8")) % spec.dim
        counts[idx] = counts.get(idx, 0.0) + 1.0

    toks = tokenize(text)
    lo, hi = spec.word_ngrams
    for n in range(lo, hi + 1):
        for i in range(len(toks) - n + 1):
            bump("w%d:%s" % (n, " ".join(toks[i:i + n])))
    joined = " ".join(toks)
    lo, hi = spec.char_ngrams
    for n in range(lo, hi + 1):
        for i in range(len(joined) - n + 1):
            bump("c%d:%s" % (n, joined[i:i + n]))
    norm = math.sqrt(sum(v * v for v in counts.values()))
    if norm > 0:
        counts = {k: v / norm for k, v in counts.items()}
    return counts


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass(frozen=True)
class CriticModel:
    """Immutable trained critic; scoring is a fixed-order sparse dot product."""

    spec: FeatureSpec
    weights: np.ndarray
    bias: float
    train_accuracy: float | None = None

    def score(self, text: str) -> float:
        feats = _features(text, self.spec)
        z = self.bias
        for idx in sorted(feats):
            z += float(self.weights[idx]) * feats[idx]
        return _sigmoid(z)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("genloop-critic 1\n")
            f.write(f"dim {self.spec.dim}\n")
            f.write(f"word {self.spec.word_ngrams[0]} {self.spec.word_ngrams[1]}\n")
            f.write(f"char {self.spec.char_ngrams[0]} {self.spec.char_ngrams[1]}\n")
            f.write(f"bias {self.bias!r}\n")
            nz = np.nonzero(self.weights)[0]
            f.write(f"weights {len(nz)}\n")
            for idx in nz:
                f.write(f"{int(idx)} {float(self.weights[idx])!r}\n")

    @classmethod
    def load(cls, path) -> "CriticModel":
        with open(path, "r", encoding="utf-8") as f:
            if f.readline().split() != ["genloop-critic", "1"]:
                raise InputError("unrecognized critic file header")
            dim = int(f.readline().split()[1])
            word = tuple(int(x) for x in f.readline().split()[1:])
            char = tuple(int(x) for x in f.readline().split()[1:])
            bias = float(f.readline().split()[1])
            n = int(f.readline().split()[1])
            weights = np.zeros(dim)
            for _ in range(n):
                idx, val = f.readline().split()
                weights[int(idx)] = float(val)
        return cls(FeatureSpec(dim, word, char), weights, bias)


def _design_matrix(texts: list[str], spec: FeatureSpec) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for text in texts:
        feats = _features(text, spec)
        for idx in sorted(feats):
            indices.append(idx)
            data.append(feats[idx])
        indptr.append(len(indices))
    return sparse.csr_matrix((data, indices, indptr), shape=(len(texts), spec.dim))


def train_critic(data: list[LabeledExample], spec: FeatureSpec = FeatureSpec(),
                 l2: float = 1e-3, max_iter: int = 500) -> CriticModel:
    """Fit the logistic-regression critic by L-BFGS on the mean log-loss.

    Deterministic: fixed zero initialization, fixed feature hashing, and a
    mean (not summed) loss, so duplicating the dataset leaves the optimum
    unchanged. Requires both classes to be present.
    """
    if not data:
        raise InputError("no training data")
    y = np.array([1.0 if ex.valid else 0.0 for ex in data])
    if y.min() == y.max():
        raise InputError("training data must contain both valid and invalid examples")
    X = _design_matrix([ex.text for ex in data], spec)
    n = len(data)

    def objective(wb):
        w, b = wb[:-1], wb[-1]
        z = X @ w + b
        # log(1 + e^z) - y z, stable in both tails
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * float(w @ w)
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        resid = (p - y) / n
        grad = np.concatenate([X.T @ resid + l2 * w, [float(resid.sum())]])
        return loss, grad

    res = optimize.minimize(objective, np.zeros(spec.dim + 1), jac=True,
                            method="L-BFGS-B", options={"maxiter": max_iter})
    w, b = res.x[:-1], float(res.x[-1])
    preds = (X @ w + b) > 0
    acc = float(np.mean(preds == (y > 0.5)))
    return CriticModel(spec, w, b, train_accuracy=acc)


class OracleCritic:
    """Exact critic wrapping a membership predicate; scores are hard 0/1."""

    def __init__(self, predicate: Callable[[str], bool]):
        self._predicate = predicate

    def score(self, text: str) -> float:
        return 1.0 if self._predicate(text) else 0.0


def filter_generations(pool: Iterable[Generation], critic, delta: float = 0.5,
                       ) -> Iterator[Generation]:
    """Yield generations scoring strictly above delta, critic score attached."""
    if not 0.0 <= delta <= 1.0:
        raise InputError(f"delta must be in [0, 1], got {delta}")
    for g in pool:
        s = critic.score(g.text)
        if s > delta:
            yield replace(g, critic=s)
