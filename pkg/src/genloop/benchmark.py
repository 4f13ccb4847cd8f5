"""Shipped synthetic benchmark for the self-imitation loop.

A tiny statement grammar defines ground truth: a statement is valid iff
it reads ``<subject> <relation> <attr1> <attr2>`` with the subject and
the two-token attribute drawn from that relation's lists. The starting
model is fit on a corpus that mixes valid statements with corrupted ones
(attributes replaced by relation-specific noise), at per-subject noise
levels: some subjects are mostly clean, some mostly corrupted, and some
barely appear at all, so their prompts lean on backed-off shared mass.

That heterogeneity is what makes the loop measurably help: clean prompts
feed the filtered pool from iteration zero, fine-tuning shifts the
shared per-relation distribution toward valid attributes, and the noisy
and sparse prompts improve iteration over iteration. Ground truth stays
exact throughout via the grammar-membership oracle critic, so validity
rates need no human labels.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .constraints import build_standard_set
from .critic import OracleCritic
from .decoder import DecodeJob, DecoderConfig
from .errors import InputError
from .lm import NGramModel, fit_texts
from .selfimit import LoopConfig
from .text import tokenize

Attr = tuple[str, str]


@dataclass(frozen=True)
class Grammar:
    """Validity table: per relation, the allowed subjects and two-token attributes."""

    relations: tuple[str, ...]
    subjects: tuple[tuple[str, ...], ...]    # aligned with relations
    attributes: tuple[tuple[Attr, ...], ...]  # aligned with relations

    def __post_init__(self):
        if not (len(self.relations) == len(self.subjects) == len(self.attributes)):
            raise InputError("relations, subjects and attributes must align")

    def subjects_for(self, relation: str) -> tuple[str, ...]:
        return self.subjects[self.relations.index(relation)]

    def attributes_for(self, relation: str) -> tuple[Attr, ...]:
        return self.attributes[self.relations.index(relation)]

    def statements(self) -> list[str]:
        out = []
        for r, subs, attrs in zip(self.relations, self.subjects, self.attributes):
            for s in subs:
                for a in attrs:
                    out.append(f"{s} {r} {a[0]} {a[1]}")
        return out

    def is_valid(self, text: str) -> bool:
        toks = tokenize(text)
        if len(toks) != 4 or toks[1] not in self.relations:
            return False
        i = self.relations.index(toks[1])
        return toks[0] in self.subjects[i] and (toks[2], toks[3]) in self.attributes[i]

    def to_json(self) -> dict:
        return {"format": "genloop-grammar", "version": 1,
                "relations": list(self.relations),
                "subjects": [list(s) for s in self.subjects],
                "attributes": [[list(a) for a in attrs] for attrs in self.attributes]}

    @classmethod
    def from_json(cls, obj: dict) -> "Grammar":
        if obj.get("format") != "genloop-grammar" or obj.get("version") != 1:
            raise InputError("not a v1 grammar file")
        return cls(tuple(obj["relations"]),
                   tuple(tuple(s) for s in obj["subjects"]),
                   tuple(tuple(tuple(a) for a in attrs) for attrs in obj["attributes"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Grammar":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(json.load(f))


def default_grammar() -> Grammar:
    """The fixed benchmark grammar: 3 relations x 6 subjects x 8 attributes."""
    return Grammar(
        relations=("can", "have", "are"),
        subjects=(
            ("birds", "fish", "dogs", "horses", "robots", "planes",
             "otters", "frogs", "goats", "crickets"),
            ("spiders", "cars", "trees", "houses", "wolves", "boats",
             "camels", "ferns", "turtles", "bees"),
            ("rocks", "whales", "ants", "glaciers", "puppies", "rivers",
             "comets", "violins", "deserts", "owls"),
        ),
        attributes=(
            (("fly", "south"), ("swim", "fast"), ("run", "far"), ("jump", "high"),
             ("dig", "deep"), ("climb", "well"), ("see", "colors"), ("hear", "sounds"),
             ("build", "nests"), ("solve", "puzzles")),
            (("sharp", "teeth"), ("long", "tails"), ("strong", "legs"), ("green", "leaves"),
             ("thick", "fur"), ("big", "eyes"), ("hard", "shells"), ("deep", "roots"),
             ("soft", "paws"), ("curved", "horns")),
            (("very", "large"), ("quite", "small"), ("extremely", "old"), ("usually", "gray"),
             ("often", "loud"), ("rather", "quiet"), ("really", "heavy"), ("quick", "swimmers"),
             ("fairly", "common"), ("truly", "ancient")),
        ),
    )


# Relation-specific corrupted attributes (never valid under the grammar).
_NOISE_ATTRS: dict[str, tuple[Attr, ...]] = {
    "can": (("float", "backwards"), ("melt", "quietly"), ("vanish", "twice"),
            ("sleep", "loudly"), ("argue", "sideways"), ("explode", "gently")),
    "have": (("wet", "sparks"), ("square", "clouds"), ("frozen", "songs"),
             ("purple", "thoughts"), ("rubber", "dreams"), ("upside", "bells")),
    "are": (("loudly", "invisible"), ("backwards", "alive"), ("mostly", "imaginary"),
            ("barely", "solid"), ("strangely", "liquid"), ("weirdly", "hollow")),
}

# Subject slots per relation: two mostly-clean, two noisy, six sparse.
# Sparse subjects barely occur in the corpus, so their prompts lean on the
# shared per-relation back-off mass -- the channel fine-tuning steers.
_NOISE_LEVELS = (0.25, 0.25, 0.85, 0.85, 0.30, 0.40, 0.50, 0.60, 0.65, 0.70)
_FREQUENCIES = (1.0, 1.0, 1.0, 1.0, 0.04, 0.04, 0.04, 0.04, 0.04, 0.04)


def make_corpus(grammar: Grammar, n_sentences: int, seed: int) -> list[str]:
    """Sample the noisy training corpus: valid statements plus corrupted ones."""
    rng = random.Random(seed)
    pairs: list[tuple[str, str, float]] = []
    weights: list[float] = []
    for r, subs in zip(grammar.relations, grammar.subjects):
        for j, s in enumerate(subs):
            pairs.append((r, s, _NOISE_LEVELS[j]))
            weights.append(_FREQUENCIES[j])
    noise_skew = [6, 5, 4, 3, 2, 1]  # concentrate noise on a few attribute types
    out = []
    for _ in range(n_sentences):
        r, s, noise = rng.choices(pairs, weights)[0]
        if rng.random() < noise:
            a = rng.choices(_NOISE_ATTRS[r], noise_skew)[0]
        else:
            a = rng.choice(grammar.attributes_for(r))
        out.append(f"{s} {r} {a[0]} {a[1]}")
    return out


def make_jobs(grammar: Grammar) -> list[DecodeJob]:
    """One decode job per (subject, relation) pair, with the standard CNF."""
    jobs = []
    for r, subs in zip(grammar.relations, grammar.subjects):
        for s in subs:
            jobs.append(DecodeJob(f"bench:{s}:{r}", f"{s} {r}", build_standard_set(s, r)))
    return jobs


@dataclass
class Benchmark:
    grammar: Grammar
    corpus: list[str]
    model: NGramModel
    jobs: list[DecodeJob]
    critic: OracleCritic
    loop: LoopConfig = field(default_factory=LoopConfig)


def build_benchmark(seed: int = 0, n_sentences: int = 3000, order: int = 3,
                    discount: float = 0.75, iterations: int = 3,
                    mix_weight: float = 12.0) -> Benchmark:
    """Assemble the standard benchmark: grammar, corpus, starting model, jobs, oracle."""
    grammar = default_grammar()
    corpus = make_corpus(grammar, n_sentences, seed)
    model = fit_texts(corpus, order=order, discount=discount)
    cfg = LoopConfig(
        iterations=iterations,
        decoder=DecoderConfig(beam_size=10, num_returns=10, max_len=6, min_len=2,
                              length_penalty=0.1, lam=20.0),
        delta=0.5,
        mix_weight=mix_weight,
        dedup=True,
        seed=seed,
    )
    return Benchmark(grammar, corpus, model, make_jobs(grammar),
                     OracleCritic(grammar.is_valid), cfg)
