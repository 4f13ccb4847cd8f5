"""CNF lexico-syntactic constraints with incremental tracking.

A constraint set is a conjunction of clauses; each clause is a
disjunction of literals. Two literal kinds exist:

* phrase literals -- a token run that must (positive) or must not
  (negative) appear anywhere in the generated continuation;
* count literals -- the number of occurrences of any member of a word
  set must satisfy ``<= bound`` or ``== bound``.

Matching is on lowercase token boundaries; multi-token phrases (and
multi-token count-set members such as "the following") match contiguous
token runs, occurrences may overlap. Only generated continuation tokens
are tracked: prompts contain their own articles and relational phrases
by construction, so the decoder starts every hypothesis from
``initial_state()`` at the prompt boundary.

Mid-sequence, a clause counts as violated only once no extension can
satisfy it (a <=/== count already exceeded, a forbidden phrase already
emitted). At end of sequence the remaining pendings resolve: unseen
negative phrases and in-bound counts become satisfied, unmet positive
phrases become violated.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Literal as TL, Sequence

from .errors import InputError
from .text import tokenize

Phrase = tuple[str, ...]

SATISFIED = "satisfied"
VIOLATED = "violated"
PENDING = "pending"


@dataclass(frozen=True)
class PhraseLiteral:
    """A token run that must (negated=False) or must not (negated=True) appear."""

    tokens: Phrase
    negated: bool = True

    def __post_init__(self):
        if not self.tokens:
            raise InputError("phrase literal needs at least one token")

    @classmethod
    def from_text(cls, text: str, negated: bool = True) -> "PhraseLiteral":
        toks = tuple(tokenize(text))
        if not toks:
            raise InputError(f"phrase {text!r} tokenizes to nothing")
        return cls(toks, negated)


@dataclass(frozen=True)
class CountLiteral:
    """Occurrences of any member phrase compared against a bound."""

    phrases: tuple[Phrase, ...]
    comparator: TL["<=", "=="]
    bound: int

    def __post_init__(self):
        if not self.phrases:
            raise InputError("count literal needs a non-empty word set")
        if len(set(self.phrases)) != len(self.phrases):
            raise InputError("count literal word set has duplicate members")
        if self.bound < 0:
            raise InputError("count literal bound must be >= 0")
        if self.comparator not in ("<=", "=="):
            raise InputError(f"unknown comparator {self.comparator!r}")

    @classmethod
    def from_words(cls, words: Iterable[str], comparator: str, bound: int) -> "CountLiteral":
        phrases = sorted({tuple(tokenize(w)) for w in words if tokenize(w)})
        return cls(tuple(phrases), comparator, bound)


LiteralT = PhraseLiteral | CountLiteral
Clause = tuple[LiteralT, ...]

# Per-literal tracking values: (automaton position, seen) for a phrase,
# (count, positions of the multi-token members) for a count literal.
# Single-token members need no automaton: they match or they don't.
PhraseState = tuple[int, bool]
CountState = tuple[int, tuple[int, ...]]
LiteralState = PhraseState | CountState


@dataclass(frozen=True)
class ConstraintState:
    """Immutable per-hypothesis tracking value; one entry per literal."""

    literals: tuple[LiteralState, ...]


def _failure(pattern: Phrase) -> tuple[int, ...]:
    """KMP failure function; fail[i] = longest proper border of pattern[:i]."""
    fail = [0] * (len(pattern) + 1)
    k = 0
    for i in range(1, len(pattern)):
        while k > 0 and pattern[i] != pattern[k]:
            k = fail[k]
        if pattern[i] == pattern[k]:
            k += 1
        fail[i + 1] = k
    return tuple(fail)


def _advance_match(pattern: Phrase, fail: tuple[int, ...], pos: int, token: str) -> tuple[int, bool]:
    """One automaton step; returns (new position, full match occurred)."""
    while pos > 0 and pattern[pos] != token:
        pos = fail[pos]
    if pattern[pos] == token:
        pos += 1
    if pos == len(pattern):
        return fail[pos], True
    return pos, False


class _CompiledLiteral:
    """Precomputed matching machinery for one literal."""

    __slots__ = ("literal", "single", "multi", "fails")

    def __init__(self, lit: LiteralT):
        self.literal = lit
        if isinstance(lit, PhraseLiteral):
            self.single = {lit.tokens[0]} if len(lit.tokens) == 1 else frozenset()
            self.multi = (lit.tokens,) if len(lit.tokens) > 1 else ()
        else:
            self.single = frozenset(p[0] for p in lit.phrases if len(p) == 1)
            self.multi = tuple(p for p in lit.phrases if len(p) > 1)
        self.fails = tuple(_failure(p) for p in self.multi)

    def initial(self) -> LiteralState:
        if isinstance(self.literal, PhraseLiteral):
            return (0, False)
        return (0, (0,) * len(self.multi))


class _Compiled:
    """Automata and clause layout for one ConstraintSet."""

    def __init__(self, cset: "ConstraintSet"):
        self.literals: list[_CompiledLiteral] = []
        self.clause_slices: list[tuple[int, int]] = []
        for clause in cset.clauses:
            start = len(self.literals)
            self.literals.extend(_CompiledLiteral(lit) for lit in clause)
            self.clause_slices.append((start, len(self.literals)))


def _literal_status(lit: LiteralT, state: LiteralState, terminal: bool) -> str:
    if isinstance(lit, PhraseLiteral):
        seen = state[1]
        if lit.negated:
            if seen:
                return VIOLATED
            return SATISFIED if terminal else PENDING
        if seen:
            return SATISFIED
        return VIOLATED if terminal else PENDING
    count = state[0]
    if count > lit.bound:
        return VIOLATED
    if not terminal:
        return PENDING
    if lit.comparator == "<=":
        return SATISFIED
    return SATISFIED if count == lit.bound else VIOLATED


@dataclass(frozen=True)
class ConstraintSet:
    """A CNF formula over phrase and count literals."""

    clauses: tuple[Clause, ...]

    def __post_init__(self):
        for clause in self.clauses:
            if not clause:
                raise InputError("CNF clause must be non-empty")

    def _comp(self) -> _Compiled:
        comp = getattr(self, "_compiled_cache", None)
        if comp is None:
            comp = _Compiled(self)
            object.__setattr__(self, "_compiled_cache", comp)
        return comp

    def initial_state(self) -> ConstraintState:
        return ConstraintState(tuple(cl.initial() for cl in self._comp().literals))

    def advance(self, state: ConstraintState, token: str) -> ConstraintState:
        """Feed one generated token through every literal automaton."""
        out: list[LiteralState] = []
        for cl, lstate in zip(self._comp().literals, state.literals):
            if isinstance(cl.literal, PhraseLiteral):
                pos, seen = lstate
                if cl.multi:
                    pattern = cl.multi[0]
                    if pos == 0 and pattern[0] != token:
                        out.append(lstate)
                    else:
                        pos, matched = _advance_match(pattern, cl.fails[0], pos, token)
                        out.append((pos, seen or matched))
                else:
                    out.append((0, True) if (not seen and token in cl.single) else lstate)
            else:
                count, positions = lstate
                inc = 1 if token in cl.single else 0
                if cl.multi:
                    changed = None
                    for i, (pattern, fail) in enumerate(zip(cl.multi, cl.fails)):
                        pos = positions[i]
                        if pos == 0 and pattern[0] != token:
                            continue
                        npos, matched = _advance_match(pattern, fail, pos, token)
                        if matched:
                            inc += 1
                        if npos != pos:
                            if changed is None:
                                changed = list(positions)
                            changed[i] = npos
                    if changed is not None:
                        positions = tuple(changed)
                if inc == 0 and positions is lstate[1]:
                    out.append(lstate)
                else:
                    out.append((count + inc, positions))
        return ConstraintState(tuple(out))

    def evaluate(self, tokens: Sequence[str]) -> ConstraintState:
        """From-scratch evaluation of a whole prefix (advance folded from the start)."""
        state = self.initial_state()
        for t in tokens:
            state = self.advance(state, t)
        return state

    def clause_status(self, state: ConstraintState, terminal: bool = False) -> list[str]:
        comp = self._comp()
        result = []
        for start, end in comp.clause_slices:
            stati = [_literal_status(comp.literals[i].literal, state.literals[i], terminal)
                     for i in range(start, end)]
            if SATISFIED in stati:
                result.append(SATISFIED)
            elif all(s == VIOLATED for s in stati):
                result.append(VIOLATED)
            else:
                result.append(PENDING)
        return result

    def violation_count(self, state: ConstraintState, terminal: bool = False) -> int:
        """Clauses not satisfied. Mid-sequence only irrecoverable violations count;
        at terminal every clause has resolved, so this is exactly the CNF penalty."""
        comp = self._comp()
        literals = comp.literals
        lstates = state.literals
        violated = 0
        for start, end in comp.clause_slices:
            clause_violated = True
            for i in range(start, end):
                s = _literal_status(literals[i].literal, lstates[i], terminal)
                if s == SATISFIED:
                    clause_violated = False
                    break
                if s == PENDING:
                    clause_violated = False
            if clause_violated:
                violated += 1
        return violated

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        clauses = []
        for clause in self.clauses:
            lits = []
            for lit in clause:
                if isinstance(lit, PhraseLiteral):
                    lits.append({"kind": "phrase", "tokens": list(lit.tokens),
                                 "negated": lit.negated})
                else:
                    lits.append({"kind": "count", "phrases": [list(p) for p in lit.phrases],
                                 "comparator": lit.comparator, "bound": lit.bound})
            clauses.append(lits)
        return {"clauses": clauses}

    @classmethod
    def from_json(cls, obj: dict) -> "ConstraintSet":
        clauses = []
        for clause in obj["clauses"]:
            lits: list[LiteralT] = []
            for lit in clause:
                if lit["kind"] == "phrase":
                    lits.append(PhraseLiteral(tuple(lit["tokens"]), bool(lit["negated"])))
                elif lit["kind"] == "count":
                    lits.append(CountLiteral(tuple(tuple(p) for p in lit["phrases"]),
                                             lit["comparator"], int(lit["bound"])))
                else:
                    raise InputError(f"unknown literal kind {lit.get('kind')!r}")
            clauses.append(tuple(lits))
        return cls(tuple(clauses))

    def to_text(self) -> str:
        """Line-oriented rendering for CLI inspection, one clause per line."""
        lines = []
        for clause in self.clauses:
            parts = []
            for lit in clause:
                if isinstance(lit, PhraseLiteral):
                    parts.append(("not " if lit.negated else "has ") + '"' + " ".join(lit.tokens) + '"')
                else:
                    names = ",".join(" ".join(p) for p in lit.phrases)
                    parts.append(f"count{{{names}}} {lit.comparator} {lit.bound}")
            lines.append(" OR ".join(parts))
        return "\n".join(lines)


def _load_word_list(name: str) -> tuple[str, ...]:
    data = resources.files("genloop.data").joinpath(name).read_text(encoding="utf-8")
    return load_word_lines(data.splitlines())


def load_word_lines(lines: Iterable[str]) -> tuple[str, ...]:
    """One entry per line, UTF-8; blank lines skipped, duplicates collapsed."""
    seen = {line.strip() for line in lines if line.strip()}
    return tuple(sorted(seen))


@lru_cache(maxsize=None)
def function_words() -> tuple[str, ...]:
    return _load_word_list("function_words.txt")


@lru_cache(maxsize=None)
def connective_words() -> tuple[str, ...]:
    return _load_word_list("connective_words.txt")


def build_standard_set(source_concept: str, relational_phrase: str,
                       related_concept: str | None = None,
                       function_set: Iterable[str] | None = None,
                       connective_set: Iterable[str] | None = None) -> ConstraintSet:
    """The standard four-clause CNF for a (concept, relation) prompt.

    count(function_words) <= 1 AND count(connective_words) == 0 AND no
    source concept AND no relational phrase; plus one positive clause for
    the related concept when given. Word sets default to the packaged
    lists but are overridable.
    """
    if not tokenize(source_concept):
        raise InputError("source concept must be non-empty")
    if not tokenize(relational_phrase):
        raise InputError("relational phrase must be non-empty")
    clauses: list[Clause] = [
        (CountLiteral.from_words(function_set or function_words(), "<=", 1),),
        (CountLiteral.from_words(connective_set or connective_words(), "==", 0),),
        (PhraseLiteral.from_text(source_concept, negated=True),),
        (PhraseLiteral.from_text(relational_phrase, negated=True),),
    ]
    if related_concept is not None:
        clauses.append((PhraseLiteral.from_text(related_concept, negated=False),))
    return ConstraintSet(tuple(clauses))


EMPTY = ConstraintSet(())
