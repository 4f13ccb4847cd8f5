#!/usr/bin/env python3
"""Prompt construction walkthrough: template expansion and perplexity gating.

A noun concept times a relational phrase expands to 16 surface variants
(optional adverb x optional article); the model picks the one it finds
least perplexing. Goal concepts get four fixed prefixes instead.
"""

from genloop import fit_texts, per_word_perplexity
from genloop.prompts import (Concept, RelationalPhrase, build_jobs, expand_goal,
                             expand_noun, gate, select_best_variant)

model = fit_texts([
    "typically , a bicycle has two wheels",
    "usually , the oven is hot",
    "a bicycle has a bell",
    "in order to get better at chess , practice daily",
], order=2)

concept = Concept("bicycle", "noun_phrase")
relation = RelationalPhrase("has")

print("== the 16 template variants ==")
for cand in expand_noun(concept, relation):
    print(f"  ppl={per_word_perplexity(model, cand):10.2f}  {cand!r}")

best, ppl = select_best_variant(expand_noun(concept, relation), model)
print(f"\nselected: {best!r} (perplexity {ppl:.2f})")
print(f"passes the 250 gate: {gate(ppl, 250.0)}")

print("\n== goal prompts ==")
for prompt in expand_goal(Concept("get better at chess", "goal")):
    print(f"  {prompt!r}")

# build_jobs wires it all together: expansion, selection, gating, and the
# per-job constraint set that forbids echoing the concept and relation.
jobs = build_jobs([concept], [relation], model, ppl_threshold=250.0)
print(f"\n{len(jobs)} job(s); first constraint set:")
print(jobs[0].constraints.to_text())
