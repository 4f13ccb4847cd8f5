#!/usr/bin/env python3
"""Constrained decoding walkthrough: how the clause penalty steers the beam.

Fits a small n-gram model on a handful of statement-like sentences, then
decodes the prompt "a bicycle has" twice: once unconstrained, once under
the standard constraint set (limited function words, no connectives, no
echo of the concept or relation).
"""

from genloop import DecoderConfig, build_standard_set, decode, fit_texts
from genloop.constraints import ConstraintSet

corpus = [
    "a bicycle has two wheels",
    "a bicycle has a bell and a seat",
    "a bicycle has pedals",
    "a bicycle has a bicycle chain",
    "a wagon has four wheels",
    "a truck has a horn",
]

model = fit_texts(corpus, order=3, discount=0.75)
prompt = model.vocab.encode("a bicycle has")

cfg = DecoderConfig(beam_size=10, num_returns=5, max_len=8, min_len=1,
                    length_penalty=0.1, lam=20.0)

print("== plain beam search (no constraints) ==")
for g in decode(model, prompt, ConstraintSet(()), cfg, prompt_text="a bicycle has"):
    print(f"  score={g.score:8.3f}  violations={g.violations}  {g.text}")

# The standard set forbids re-emitting the concept and the relation and
# keeps the continuation terse: at most one function word, no connectives.
constraints = build_standard_set("bicycle", "has")
print("\n== the constraint set ==")
print(constraints.to_text())

print("\n== penalized beam search ==")
for g in decode(model, prompt, constraints, cfg, prompt_text="a bicycle has"):
    print(f"  score={g.score:8.3f}  violations={g.violations}  {g.text}")

# "a bicycle has a bicycle chain" echoes the concept; under the penalty it
# drops to the bottom while clean continuations like "two wheels" stay on top.
