import random

import pytest

from genloop import InputError
from genloop.constraints import (ConstraintSet, CountLiteral, PhraseLiteral,
                                 build_standard_set, connective_words, function_words,
                                 load_word_lines)

import oracles

# The packaged word lists, by content.
EXPECTED_FUNCTION = {"in", "on", "of", "for", "at", "anybody", "it", "one",
                     "the", "a", "that", "or", "got", "do"}
EXPECTED_CONNECTIVE = {
    "without", "between", "he", "they", "she", "my", "more", "much", "either",
    "neither", "and", "when", "while", "although", "am", "no", "nor", "not",
    "as", "because", "since", "finally", "however", "therefore", "consequently",
    "furthermore", "nonetheless", "moreover", "alternatively", "henceforward",
    "nevertheless", "whereas", "meanwhile", "this", "there", "here", "same",
    "few", "1", "2", "3", "4", "5", "6", "7", "8", "9", "0", "similar",
    "the following", "by now", "into",
}


def random_constraint_set(rng, words):
    clauses = []
    for _ in range(rng.randint(1, 4)):
        literals = []
        for _ in range(rng.randint(1, 2)):
            if rng.random() < 0.5:
                phrase = tuple(rng.choice(words) for _ in range(rng.randint(1, 3)))
                literals.append(PhraseLiteral(phrase, negated=rng.random() < 0.7))
            else:
                members = tuple(sorted({(rng.choice(words),)
                                        for _ in range(rng.randint(1, 3))}))
                literals.append(CountLiteral(members, rng.choice(("<=", "==")),
                                             rng.randint(0, 3)))
        clauses.append(tuple(literals))
    return ConstraintSet(tuple(clauses))


class TestAdvance:
    def test_count_threshold_crossing(self):
        cset = ConstraintSet(((CountLiteral((("the",), ("a",)), "<=", 1),),))
        state = cset.evaluate(["the"])
        assert cset.clause_status(state) == ["pending"]
        state = cset.advance(state, "a")
        assert cset.clause_status(state) == ["violated"]
        assert cset.violation_count(state, terminal=False) == 1

    def test_negative_phrase_completes(self):
        cset = ConstraintSet(((PhraseLiteral(("the", "cat"), negated=True),),))
        state = cset.evaluate(["saw", "the"])
        assert cset.clause_status(state) == ["pending"]
        state = cset.advance(state, "cat")
        assert cset.clause_status(state) == ["violated"]

    def test_random_walks_match_scratch_evaluation(self):
        rng = random.Random(42)
        words = ["the", "cat", "sat", "on", "a", "mat", "dog"]
        for _ in range(30):
            cset = random_constraint_set(rng, words)
            state = cset.initial_state()
            tokens = []
            for _ in range(200):
                tok = rng.choice(words)
                tokens.append(tok)
                state = cset.advance(state, tok)
                assert state == oracles.scan_state(cset, tokens)

    def test_overlapping_phrase_occurrences_counted(self):
        cset = ConstraintSet(((CountLiteral((("a", "a"),), "<=", 1),),))
        state = cset.evaluate(["a", "a", "a"])  # matches at offsets 0 and 1
        assert state.literals[0][0] == 2
        assert cset.violation_count(state, terminal=True) == 1


class TestViolationCount:
    def test_empty_prefix_all_negative_terminal(self):
        cset = ConstraintSet((
            (PhraseLiteral(("bicycle",), negated=True),),
            (PhraseLiteral(("has",), negated=True),),
        ))
        assert cset.violation_count(cset.initial_state(), terminal=True) == 0

    def test_forbidden_concept_present(self):
        cset = build_standard_set("bicycle", "has")
        state = cset.evaluate(["every", "bicycle", "is", "fun"])
        assert cset.violation_count(state, terminal=True) >= 1

    def test_fifty_random_sequences_match_scan_reference(self):
        rng = random.Random(7)
        words = ["bicycle", "has", "wheels", "the", "a", "and", "not", "fast",
                 "red", "one", "it"]
        cset = build_standard_set("bicycle", "has")
        for _ in range(50):
            tokens = [rng.choice(words) for _ in range(rng.randint(0, 25))]
            state = cset.evaluate(tokens)
            for terminal in (False, True):
                assert (cset.violation_count(state, terminal)
                        == oracles.scan_violations(cset, tokens, terminal))

    def test_positive_phrase_resolution(self):
        cset = ConstraintSet(((PhraseLiteral(("credit", "card"), negated=False),),))
        empty = cset.initial_state()
        assert cset.violation_count(empty, terminal=False) == 0   # still achievable
        assert cset.violation_count(empty, terminal=True) == 1    # unmet at the end
        met = cset.evaluate(["use", "a", "credit", "card"])
        assert cset.violation_count(met, terminal=True) == 0

    def test_bounds(self):
        rng = random.Random(11)
        words = ["x", "y", "z"]
        for _ in range(20):
            cset = random_constraint_set(rng, words)
            tokens = [rng.choice(words) for _ in range(rng.randint(0, 15))]
            state = cset.evaluate(tokens)
            for terminal in (False, True):
                assert 0 <= cset.violation_count(state, terminal) <= len(cset.clauses)


class TestMonotoneViolation:
    def test_once_violated_stays_violated(self):
        rng = random.Random(23)
        words = ["p", "q", "r", "s"]
        for _ in range(50):
            clauses = []
            for _ in range(rng.randint(1, 3)):
                if rng.random() < 0.5:
                    clauses.append((PhraseLiteral(
                        tuple(rng.choice(words) for _ in range(rng.randint(1, 2))),
                        negated=True),))
                else:
                    clauses.append((CountLiteral(((rng.choice(words),),), "<=",
                                                 rng.randint(0, 2)),))
            cset = ConstraintSet(tuple(clauses))
            state = cset.initial_state()
            violated_so_far = 0
            for _ in range(30):
                state = cset.advance(state, rng.choice(words))
                now = cset.violation_count(state, terminal=False)
                assert now >= violated_so_far
                violated_so_far = now


class TestBuildStandardSet:
    def test_four_clauses(self):
        cset = build_standard_set("bicycle", "has")
        assert len(cset.clauses) == 4

    def test_related_concept_adds_positive_clause(self):
        cset = build_standard_set("hotel", "can be used", "credit card")
        assert len(cset.clauses) == 5
        lit = cset.clauses[4][0]
        assert isinstance(lit, PhraseLiteral) and not lit.negated
        assert lit.tokens == ("credit", "card")

    def test_word_lists_match_shipped_data(self):
        assert set(function_words()) == EXPECTED_FUNCTION
        assert set(connective_words()) == EXPECTED_CONNECTIVE

    def test_multiword_connectives_counted_as_runs(self):
        cset = build_standard_set("hall", "is")
        state = cset.evaluate(["see", "the", "following", "items"])
        # "the following" is one connective occurrence -> the == 0 clause breaks
        assert cset.violation_count(state, terminal=True) >= 1

    def test_empty_inputs_rejected(self):
        with pytest.raises(InputError):
            build_standard_set("", "has")
        with pytest.raises(InputError):
            build_standard_set("bicycle", " ")

    def test_custom_word_sets(self):
        cset = build_standard_set("x", "y", function_set=["foo"], connective_set=["bar"])
        state = cset.evaluate(["foo", "foo"])
        assert cset.violation_count(state, terminal=True) == 1


class TestSerialization:
    def test_json_round_trip(self):
        rng = random.Random(3)
        for _ in range(10):
            cset = random_constraint_set(rng, ["a", "b", "c"])
            assert ConstraintSet.from_json(cset.to_json()) == cset

    def test_to_text_lines(self):
        cset = build_standard_set("bicycle", "has", "wheel")
        text = cset.to_text()
        assert len(text.splitlines()) == 5
        assert 'not "bicycle"' in text
        assert 'has "wheel"' in text

    def test_empty_clause_rejected(self):
        with pytest.raises(InputError):
            ConstraintSet(((),))


class TestWordListLoading:
    def test_duplicates_collapsed(self):
        assert load_word_lines(["of", "of", "in", "", "  "]) == ("in", "of")
