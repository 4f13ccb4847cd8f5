"""Prompt construction: template expansion, variant selection, perplexity gating.

Noun-phrase concepts expand through the optional-adverb / optional-article
template (4 x 4 = 16 surface variants per relation); the variant the
model finds least perplexing survives. Goal concepts get the four fixed
prefixes, one job each. Every job carries the CNF constraint set that
forbids echoing its own concept and relational phrase.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from .constraints import ConstraintSet, build_standard_set
from .decoder import DecodeJob
from .errors import InputError
from .lm import Scorer, per_word_perplexity

logger = logging.getLogger(__name__)

ADVERBS = ("Generally", "Typically", "Usually")
ARTICLES = ("a", "an", "the")
GOAL_PREFIXES = ("In order to", "Before you", "After you", "While you")

# Default relational phrases for noun concepts.
DEFAULT_RELATIONS = ("are", "is", "have", "can", "has", "should",
                     "produces", "may have", "may be")

DEFAULT_PPL_THRESHOLD = 250.0

NOUN = "noun_phrase"
GOAL = "goal"


@dataclass(frozen=True)
class Concept:
    surface: str
    kind: str
    source: str = ""

    def __post_init__(self):
        if not self.surface.strip():
            raise InputError("concept surface must be non-empty")
        if self.kind not in (NOUN, GOAL):
            raise InputError(f"concept kind must be {NOUN!r} or {GOAL!r}, got {self.kind!r}")


@dataclass(frozen=True)
class RelationalPhrase:
    surface: str

    def __post_init__(self):
        if not self.surface.strip():
            raise InputError("relational phrase must be non-empty")


@dataclass(frozen=True)
class PromptJob:
    """A prompt ready to decode: surface text, provenance, constraints, LM fit."""

    job: str
    prompt: str
    concept: Concept
    relation: RelationalPhrase | None
    constraints: ConstraintSet
    perplexity: float

    def to_decode_job(self) -> DecodeJob:
        return DecodeJob(self.job, self.prompt, self.constraints)

    def to_json(self) -> str:
        return json.dumps({
            "job": self.job,
            "prompt": self.prompt,
            "concept": {"surface": self.concept.surface, "kind": self.concept.kind,
                        "source": self.concept.source},
            "relation": self.relation.surface if self.relation else None,
            "constraints": self.constraints.to_json(),
            "perplexity": self.perplexity,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "PromptJob":
        obj = json.loads(line)
        return cls(
            job=obj["job"],
            prompt=obj["prompt"],
            concept=Concept(**obj["concept"]),
            relation=RelationalPhrase(obj["relation"]) if obj.get("relation") else None,
            constraints=ConstraintSet.from_json(obj["constraints"]),
            perplexity=obj["perplexity"],
        )


def expand_noun(concept: Concept, relation: RelationalPhrase) -> list[str]:
    """All 16 template variants for a noun concept and one relational phrase."""
    if concept.kind != NOUN:
        raise InputError(f"expand_noun needs a {NOUN} concept, got {concept.kind}")
    out = []
    for adverb in (None, *ADVERBS):
        for article in (None, *ARTICLES):
            head = f"{article} {concept.surface}" if article else concept.surface
            out.append(f"{adverb}, {head} {relation.surface}" if adverb
                       else f"{head} {relation.surface}")
    return out


def expand_goal(concept: Concept) -> list[str]:
    """The four goal prompts, one per fixed prefix, in prefix order."""
    if concept.kind != GOAL:
        raise InputError(f"expand_goal needs a {GOAL} concept, got {concept.kind}")
    return [f"{prefix} {concept.surface}" for prefix in GOAL_PREFIXES]


def select_best_variant(candidates: Sequence[str], model: Scorer) -> tuple[str, float]:
    """Lowest-perplexity candidate; earlier candidate wins ties."""
    if not candidates:
        raise InputError("no candidates to select from")
    best, best_ppl = candidates[0], per_word_perplexity(model, candidates[0])
    for cand in candidates[1:]:
        ppl = per_word_perplexity(model, cand)
        if ppl < best_ppl:
            best, best_ppl = cand, ppl
    return best, best_ppl


def gate(perplexity: float, threshold: float = DEFAULT_PPL_THRESHOLD) -> bool:
    """Keep a prompt unless its per-word perplexity is above the threshold."""
    return perplexity <= threshold


def build_jobs(concepts: Iterable[Concept], relations: Sequence[RelationalPhrase],
               model: Scorer,
               related: Iterable[tuple[str, str]] = (),
               ppl_threshold: float = DEFAULT_PPL_THRESHOLD) -> list[PromptJob]:
    """Assemble the gated PromptJob list for every concept/relation pairing.

    Related-concept pairs produce additional jobs whose constraint set
    carries the extra positive clause requiring the related concept.
    """
    jobs: list[PromptJob] = []

    def add(job_id, prompt, concept, relation, cset, ppl):
        if not gate(ppl, ppl_threshold):
            logger.info("gated out %s (perplexity %.2f > %.2f)", job_id, ppl, ppl_threshold)
            return
        jobs.append(PromptJob(job_id, prompt, concept, relation, cset, ppl))

    for concept in concepts:
        if concept.kind == NOUN:
            for rel in relations:
                prompt, ppl = select_best_variant(expand_noun(concept, rel), model)
                add(f"noun:{concept.surface}:{rel.surface}", prompt, concept, rel,
                    build_standard_set(concept.surface, rel.surface), ppl)
        else:
            for prefix, prompt in zip(GOAL_PREFIXES, expand_goal(concept)):
                ppl = per_word_perplexity(model, prompt)
                # The prefix plays the relational-phrase role in the CNF: the
                # continuation must not re-emit it.
                add(f"goal:{concept.surface}:{prefix}", prompt, concept, None,
                    build_standard_set(concept.surface, prefix), ppl)

    for concept_surface, related_surface in related:
        concept = Concept(concept_surface, NOUN, source="related")
        for rel in relations:
            prompt, ppl = select_best_variant(expand_noun(concept, rel), model)
            add(f"related:{concept_surface}:{related_surface}:{rel.surface}", prompt,
                concept, rel,
                build_standard_set(concept_surface, rel.surface, related_surface), ppl)

    return jobs


# -- file ingestion ---------------------------------------------------------

def read_concepts(lines: Iterable[str], source_name: str = "concepts") -> list[Concept]:
    """TSV: surface<TAB>kind[<TAB>source]. Bad lines are logged and skipped."""
    out = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        try:
            if len(parts) not in (2, 3):
                raise InputError(f"expected 2 or 3 tab-separated fields, got {len(parts)}")
            out.append(Concept(parts[0].strip(), parts[1].strip(),
                               parts[2].strip() if len(parts) == 3 else ""))
        except InputError as exc:
            logger.warning("%s:%d: skipped: %s", source_name, lineno, exc)
    return out


def read_relations(lines: Iterable[str], source_name: str = "relations") -> list[RelationalPhrase]:
    """One relational phrase per line."""
    out = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        try:
            out.append(RelationalPhrase(line))
        except InputError as exc:
            logger.warning("%s:%d: skipped: %s", source_name, lineno, exc)
    return out


def read_related(lines: Iterable[str], source_name: str = "related") -> list[tuple[str, str]]:
    """TSV: concept<TAB>related concept."""
    out = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            logger.warning("%s:%d: skipped: expected concept<TAB>related", source_name, lineno)
            continue
        out.append((parts[0].strip(), parts[1].strip()))
    return out
