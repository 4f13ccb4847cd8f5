import math

import pytest

from genloop import InputError, UniformModel, Vocabulary, fit_texts, per_word_perplexity
from genloop.constraints import PhraseLiteral
from genloop.prompts import (ADVERBS, ARTICLES, GOAL_PREFIXES, Concept, PromptJob,
                             RelationalPhrase, build_jobs, expand_goal, expand_noun,
                             gate, read_concepts, read_related, read_relations,
                             select_best_variant)

BICYCLE = Concept("bicycle", "noun_phrase")
HAS = RelationalPhrase("has")


@pytest.fixture
def prompt_model():
    return fit_texts([
        "typically , a bicycle has two wheels",
        "a bicycle has a bell",
        "usually , the chess board has squares",
        "in order to get better at chess you practice",
    ], order=2)


class TestExpandNoun:
    def test_sixteen_candidates_with_expected_forms(self):
        cands = expand_noun(BICYCLE, HAS)
        assert len(cands) == 16
        assert "Typically, a bicycle has" in cands
        assert "bicycle has" in cands
        assert "the bicycle has" in cands
        assert "Generally, bicycle has" in cands

    def test_count_is_sixteen_for_any_pair(self):
        for concept in ("fruit", "credit card", "hot air balloon"):
            for rel in ("is", "may have", "can be used"):
                assert len(expand_noun(Concept(concept, "noun_phrase"),
                                       RelationalPhrase(rel))) == 16

    def test_no_candidate_stacks_adverbs_or_articles(self):
        for cand in expand_noun(BICYCLE, HAS):
            words = cand.replace(",", "").split()
            assert sum(w in ADVERBS for w in words) <= 1
            assert sum(w in ARTICLES for w in words[:2]) <= 1

    def test_goal_concept_rejected(self):
        with pytest.raises(InputError):
            expand_noun(Concept("win at chess", "goal"), HAS)


class TestExpandGoal:
    def test_four_prompts_first_is_in_order_to(self):
        out = expand_goal(Concept("get better at chess", "goal"))
        assert len(out) == 4
        assert out[0] == "In order to get better at chess"

    def test_prefixes_verbatim_at_start(self):
        out = expand_goal(Concept("plant a tree", "goal"))
        for prefix, prompt in zip(GOAL_PREFIXES, out):
            assert prompt.startswith(prefix + " ")


class TestSelectBestVariant:
    def test_single_candidate_is_itself(self, prompt_model):
        best, ppl = select_best_variant(["a bicycle has"], prompt_model)
        assert best == "a bicycle has"
        assert ppl == per_word_perplexity(prompt_model, "a bicycle has")

    def test_uniform_model_ties_resolve_to_first(self):
        model = UniformModel(Vocabulary(("<bos>", "<eos>", "<unk>", "x", "y")))
        best, _ = select_best_variant(["y x", "x y", "x x"], model)
        assert best == "y x"

    def test_matches_exhaustive_perplexity_scan(self, prompt_model):
        cands = expand_noun(BICYCLE, HAS)
        best, ppl = select_best_variant(cands, prompt_model)
        scanned = [(per_word_perplexity(prompt_model, c), i) for i, c in enumerate(cands)]
        want_ppl, want_idx = min(scanned)
        assert best == cands[want_idx]
        assert ppl == want_ppl

    def test_empty_rejected(self, prompt_model):
        with pytest.raises(InputError):
            select_best_variant([], prompt_model)


class TestGate:
    def test_boundary_cases(self):
        assert gate(249.9, 250.0)
        assert gate(250.0, 250.0)   # "above the threshold" is rejected; equal is kept
        assert not gate(251.0, 250.0)

    def test_infinite_threshold_accepts_all(self):
        assert gate(1e12, math.inf)

    def test_monotone_in_threshold(self):
        ppls = [10.0, 100.0, 249.9, 250.0, 333.3, 1000.0]
        accepted = None
        for threshold in (50.0, 250.0, 500.0, math.inf):
            now = {p for p in ppls if gate(p, threshold)}
            if accepted is not None:
                assert accepted <= now
            accepted = now


class TestBuildJobs:
    def test_noun_product_count(self, prompt_model):
        concepts = [Concept("bicycle", "noun_phrase"), Concept("chess board", "noun_phrase")]
        rels = [RelationalPhrase(r) for r in
                ("are", "is", "have", "can", "has", "should", "produces", "may have", "may be")]
        jobs = build_jobs(concepts, rels, prompt_model, ppl_threshold=math.inf)
        assert len(jobs) == 18

    def test_goal_yields_four_jobs(self, prompt_model):
        jobs = build_jobs([Concept("get better at chess", "goal")], [], prompt_model,
                          ppl_threshold=math.inf)
        assert len(jobs) == 4
        assert all(j.relation is None for j in jobs)

    def test_related_concept_carries_positive_clause(self, prompt_model):
        jobs = build_jobs([], [HAS], prompt_model, related=[("hotel", "credit card")],
                          ppl_threshold=math.inf)
        assert len(jobs) == 1
        positives = [lit for clause in jobs[0].constraints.clauses for lit in clause
                     if isinstance(lit, PhraseLiteral) and not lit.negated]
        assert positives and positives[0].tokens == ("credit", "card")

    def test_every_job_forbids_its_own_concept_and_relation(self, prompt_model):
        jobs = build_jobs([BICYCLE, Concept("win at chess", "goal")], [HAS], prompt_model,
                          ppl_threshold=math.inf)
        for job in jobs:
            negatives = {lit.tokens for clause in job.constraints.clauses for lit in clause
                         if isinstance(lit, PhraseLiteral) and lit.negated}
            assert tuple(job.concept.surface.split()) in negatives
            if job.relation is not None:
                assert tuple(job.relation.surface.lower().split()) in negatives

    def test_gating_drops_jobs(self, prompt_model):
        all_jobs = build_jobs([BICYCLE], [HAS], prompt_model, ppl_threshold=math.inf)
        gated = build_jobs([BICYCLE], [HAS], prompt_model, ppl_threshold=1.0)
        assert len(all_jobs) == 1 and len(gated) == 0

    def test_deterministic_byte_identical(self, prompt_model):
        concepts = [BICYCLE, Concept("get better at chess", "goal")]
        a = [j.to_json() for j in build_jobs(concepts, [HAS], prompt_model)]
        b = [j.to_json() for j in build_jobs(concepts, [HAS], prompt_model)]
        assert a == b

    def test_job_round_trip(self, prompt_model):
        jobs = build_jobs([BICYCLE], [HAS], prompt_model, ppl_threshold=math.inf)
        assert PromptJob.from_json(jobs[0].to_json()) == jobs[0]


class TestFileIngestion:
    def test_concepts_tsv_with_diagnostics(self, caplog):
        lines = ["bicycle\tnoun_phrase\tseed\n",
                 "broken line without tabs\n",
                 "win at chess\tgoal\n",
                 "\n",
                 "thing\tbad_kind\tx\n"]
        with caplog.at_level("WARNING"):
            out = read_concepts(lines)
        assert [c.surface for c in out] == ["bicycle", "win at chess"]
        assert sum("skipped" in r.message for r in caplog.records) == 2

    def test_relations_and_related(self):
        assert [r.surface for r in read_relations(["has\n", "\n", "may be\n"])] == ["has", "may be"]
        assert read_related(["hotel\tcredit card\n", "junk\n"]) == [("hotel", "credit card")]
