#!/usr/bin/env python3
"""Evaluation-kit walkthrough: PR/AP, accuracy, BLEU, and the
mark-and-recapture estimate of how many unique statements a corpus holds.
"""

import random

from genloop.evalkit import (ScoredLabeledItem, accuracy, bleu, chapman,
                             estimate_unique, pr_curve)

# -- precision-recall over scored, labeled statements ------------------------
items = [
    ScoredLabeledItem("birds can fly", 0.97, True),
    ScoredLabeledItem("dogs have four legs", 0.91, True),
    ScoredLabeledItem("rocks enjoy jazz", 0.80, False),
    ScoredLabeledItem("rivers flow downhill", 0.75, True),
    ScoredLabeledItem("clouds are solid", 0.40, False),
    ScoredLabeledItem("glaciers move slowly", 0.35, True),
]
curve = pr_curve(items)
print(f"accuracy: {accuracy(items):.3f}")
print(f"average precision: {curve.average_precision:.4f}")
print("threshold  precision  recall")
for t, (p, r) in zip(curve.thresholds, curve.points):
    print(f"   {t:5.2f}      {p:5.3f}   {r:5.3f}")

# -- sentence BLEU, the recapture similarity ---------------------------------
print(f"\nBLEU(identical): {bleu('birds can fly', ['birds can fly']):.3f}")
print(f"BLEU(near miss): {bleu('birds can fly south', ['birds can fly home']):.3f}")
print(f"BLEU(unrelated): {bleu('rocks enjoy jazz', ['birds can fly']):.3f}")

# -- Chapman estimator on known captures -------------------------------------
print(f"\nchapman(100, 100, 49) = {chapman(100, 100, 49):.2f}")

# -- population size of a corpus with known duplication ---------------------
# 300 unique statements, each duplicated 5 times; two 30% captures per
# concept, recapture when BLEU > 0.85 against the first capture.
rng = random.Random(0)
words = [f"w{i}" for i in range(30)]
uniques = set()
while len(uniques) < 300:
    uniques.add(" ".join(rng.choice(words) for _ in range(6)))
corpus = {"demo": [t for t in sorted(uniques) for _ in range(5)]}
report = estimate_unique(corpus, capture_fraction=0.30, bleu_threshold=0.85, seed=0)
est = report.per_concept["demo"]
print(f"\ncaptures n1={est.n1} n2={est.n2} recaptured m={est.m}")
print(f"estimated unique statements: {est.estimate:.1f} (truth: 300)")
