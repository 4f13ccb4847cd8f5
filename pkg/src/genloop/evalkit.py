"""Evaluation: precision-recall curves, accuracy, sentence BLEU, and
capture-recapture estimation of the unique-statement population.

The PR sweep is interpolation-free: items are taken in descending score
order, tied scores share one threshold point, and average precision is
the precision-weighted count of valid items over the total valid count
(so AP depends only on the ranking, never on score magnitudes).

Population estimation follows the two-capture closed-population setup:
two independent without-replacement samples per concept, a second-capture
statement counting as recaptured when its BLEU against the first
capture's same-concept statements exceeds the threshold, and the
low-bias Chapman formula

    N_hat = (n1 + 1)(n2 + 1) / (m + 1) - 1.

Capture sizes count distinct statements (exact-string duplicates inside
a capture are the same individual seen twice); with raw item counts the
estimator would track dataset size, not unique content.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import InputError
from .text import tokenize


@dataclass(frozen=True)
class ScoredLabeledItem:
    text: str
    score: float
    valid: bool
    system: str = ""
    concept: str = ""


@dataclass(frozen=True)
class PRCurve:
    points: tuple[tuple[float, float], ...]  # (precision, recall) per threshold
    thresholds: tuple[float, ...]
    average_precision: float


def pr_curve(items: Sequence[ScoredLabeledItem]) -> PRCurve:
    """Descending-score sweep; ties share a threshold point."""
    n_valid = sum(1 for it in items if it.valid)
    if n_valid == 0:
        raise InputError("PR curve undefined: no valid-labeled items")
    ranked = sorted(items, key=lambda it: -it.score)
    points: list[tuple[float, float]] = []
    thresholds: list[float] = []
    ap = 0.0
    seen = tp = 0
    i = 0
    while i < len(ranked):
        j = i
        hits = 0
        while j < len(ranked) and ranked[j].score == ranked[i].score:
            hits += ranked[j].valid
            j += 1
        seen += j - i
        tp += hits
        precision = tp / seen
        points.append((precision, tp / n_valid))
        thresholds.append(ranked[i].score)
        ap += precision * hits
        i = j
    return PRCurve(tuple(points), tuple(thresholds), ap / n_valid)


def average_precision(items: Sequence[ScoredLabeledItem]) -> float:
    return pr_curve(items).average_precision


def accuracy(items: Sequence[ScoredLabeledItem]) -> float:
    """Fraction of items labeled valid."""
    if not items:
        raise InputError("accuracy undefined on an empty list")
    return sum(1 for it in items if it.valid) / len(items)


def perplexity_score(perplexity: float) -> float:
    """Turn a perplexity into a ranking score (lower perplexity ranks higher)."""
    return -perplexity


# -- sentence BLEU ------------------------------------------------------------

class _RefProfile:
    """Merged reference n-gram maxima and lengths, reusable across candidates."""

    def __init__(self, references: Sequence[Sequence[str]], max_n: int):
        self.max_n = max_n
        self.lengths = [len(r) for r in references]
        self.maxima: list[dict[tuple[str, ...], int]] = []
        for n in range(1, max_n + 1):
            merged: dict[tuple[str, ...], int] = {}
            for ref in references:
                for gram, c in Counter(_ngrams(ref, n)).items():
                    if c > merged.get(gram, 0):
                        merged[gram] = c
            self.maxima.append(merged)


def _ngrams(tokens: Sequence[str], n: int) -> Iterable[tuple[str, ...]]:
    return (tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _bleu_against(cand: Sequence[str], profile: _RefProfile, eps: float) -> float:
    log_sum = 0.0
    used = 0
    for n in range(1, profile.max_n + 1):
        total = len(cand) - n + 1
        if total <= 0:
            break  # candidate shorter than n: cap the effective order
        matches = 0
        maxima = profile.maxima[n - 1]
        for gram, c in Counter(_ngrams(cand, n)).items():
            matches += min(c, maxima.get(gram, 0))
        if n == 1 and matches == 0:
            return 0.0
        p = matches / total if matches > 0 else eps / total
        log_sum += math.log(p)
        used += 1
    c = len(cand)
    r = min(profile.lengths, key=lambda L: (abs(L - c), L))
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum / used)


def bleu(candidate: str, references: Sequence[str], max_n: int = 4, eps: float = 0.1) -> float:
    """Sentence BLEU: modified n-gram precisions up to max_n, brevity penalty.

    Orders the candidate is too short for are skipped; zero-match orders
    above unigram get epsilon counts so short statements do not all
    collapse to zero. No unigram overlap at all scores exactly 0.0, and a
    candidate identical to any reference scores exactly 1.0.
    """
    cand = tokenize(candidate)
    if not cand:
        raise InputError("BLEU candidate must be non-empty")
    refs = [tokenize(r) for r in references]
    refs = [r for r in refs if r]
    if not refs:
        return 0.0
    return _bleu_against(cand, _RefProfile(refs, max_n), eps)


# -- mark and recapture -------------------------------------------------------

@dataclass(frozen=True)
class MnrEstimate:
    n1: int
    n2: int
    m: int
    estimate: float


@dataclass(frozen=True)
class MnrReport:
    per_concept: dict[str, MnrEstimate]
    mean_estimate: float
    skipped: tuple[str, ...]


def chapman(n1: int, n2: int, m: int) -> float:
    """Chapman closed-population estimate; well-defined at m = 0."""
    if n1 < 0 or n2 < 0 or m < 0:
        raise InputError("capture sizes must be non-negative")
    if m > min(n1, n2):
        raise InputError(f"recaptures ({m}) cannot exceed min capture size ({min(n1, n2)})")
    return (n1 + 1) * (n2 + 1) / (m + 1) - 1


def _distinct(texts: Iterable[str]) -> list[str]:
    seen = set()
    out = []
    for t in texts:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def estimate_unique(groups: Mapping[str, Sequence[str]],
                    capture_fraction: float = 0.30,
                    bleu_threshold: float = 0.85,
                    seed: int = 0,
                    max_n: int = 4,
                    eps: float = 0.1) -> MnrReport:
    """Per-concept Chapman estimates of the unique-statement population.

    Concepts with fewer than two items are skipped (noted in the report).
    Concepts are processed in sorted order from one seeded RNG stream, so
    a fixed seed gives a fixed report.
    """
    if not 0.0 < capture_fraction <= 1.0:
        raise InputError(f"capture_fraction must be in (0, 1], got {capture_fraction}")
    if not groups:
        raise InputError("no concept groups given")
    rng = random.Random(seed)
    per_concept: dict[str, MnrEstimate] = {}
    skipped: list[str] = []
    for concept in sorted(groups):
        texts = list(groups[concept])
        if len(texts) < 2:
            skipped.append(concept)
            continue
        k = max(1, int(capture_fraction * len(texts) + 0.5))
        cap1 = [texts[i] for i in sorted(rng.sample(range(len(texts)), k))]
        cap2 = [texts[i] for i in sorted(rng.sample(range(len(texts)), k))]
        d1 = _distinct(cap1)
        d2 = _distinct(cap2)
        set1 = set(d1)
        profile = _RefProfile([tokenize(t) for t in d1], max_n)
        m = 0
        for t in d2:
            sim = 1.0 if t in set1 else _bleu_against(tokenize(t), profile, eps)
            if sim > bleu_threshold:
                m += 1
        per_concept[concept] = MnrEstimate(len(d1), len(d2), m,
                                           chapman(len(d1), len(d2), m))
    if not per_concept:
        raise InputError("every concept group had fewer than two items")
    mean = sum(e.estimate for e in per_concept.values()) / len(per_concept)
    return MnrReport(per_concept, mean, tuple(skipped))
