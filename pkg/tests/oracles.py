"""Independent reference implementations used as test oracles.

Everything here is deliberately written the dumb way -- direct scans,
explicit enumeration, per-item counting -- and shares no code with the
package, so agreement is evidence rather than tautology.
"""

from __future__ import annotations

import math
from collections import Counter


# -- n-gram counting and smoothing (string-keyed, scan-based) ---------------

def ngram_count_tables(sentences: list[list[str]], order: int) -> dict:
    """Count tables for orders 1..order over BOS-padded, EOS-terminated sentences."""
    tables: dict[tuple[str, ...], Counter] = {}
    for sent in sentences:
        padded = ["<bos>"] * (order - 1) + list(sent) + ["<eos>"]
        for pos in range(order - 1, len(padded)):
            for length in range(order):
                ctx = tuple(padded[pos - length:pos])
                tables.setdefault(ctx, Counter())[padded[pos]] += 1
    return tables


def absolute_discount_prob(tables: dict, vocab: list[str], discount: float,
                           ctx: tuple[str, ...], word: str) -> float:
    """Recursive interpolated absolute discounting down to the uniform base."""
    if len(ctx) == 0 and () not in tables:
        return 1.0 / len(vocab)
    table = tables.get(ctx)
    if not table:
        return absolute_discount_prob(tables, vocab, discount, ctx[1:], word)
    total = sum(table.values())
    kept = sum(max(c - discount, 0.0) for c in table.values())
    backoff = (total - kept) / total
    lower = (1.0 / len(vocab) if len(ctx) == 0
             else absolute_discount_prob(tables, vocab, discount, ctx[1:], word))
    return max(table.get(word, 0) - discount, 0.0) / total + backoff * lower


# -- constraint evaluation by direct scanning --------------------------------

def scan_occurrences(tokens: list[str], phrase: tuple[str, ...]) -> int:
    """Number of start positions where the phrase matches (overlaps allowed)."""
    L = len(phrase)
    return sum(1 for i in range(len(tokens) - L + 1) if tuple(tokens[i:i + L]) == phrase)


def scan_match_position(tokens: list[str], phrase: tuple[str, ...]) -> int:
    """Longest k < len(phrase) such that phrase[:k] is a suffix of tokens."""
    for k in range(min(len(phrase) - 1, len(tokens)), -1, -1):
        if k == 0 or tuple(tokens[-k:]) == phrase[:k]:
            return k
    return 0


def scan_literal_status(lit, tokens: list[str], terminal: bool) -> str:
    """Direct status of one literal on a full prefix, no incremental state."""
    from genloop.constraints import CountLiteral, PhraseLiteral

    if isinstance(lit, PhraseLiteral):
        seen = scan_occurrences(tokens, lit.tokens) > 0
        if lit.negated:
            return "violated" if seen else ("satisfied" if terminal else "pending")
        return "satisfied" if seen else ("violated" if terminal else "pending")
    assert isinstance(lit, CountLiteral)
    count = sum(scan_occurrences(tokens, p) for p in lit.phrases)
    if count > lit.bound:
        return "violated"
    if not terminal:
        return "pending"
    if lit.comparator == "<=":
        return "satisfied"
    return "satisfied" if count == lit.bound else "violated"


def scan_violations(cset, tokens: list[str], terminal: bool) -> int:
    violations = 0
    for clause in cset.clauses:
        stati = [scan_literal_status(lit, tokens, terminal) for lit in clause]
        if "satisfied" in stati:
            continue
        if all(s == "violated" for s in stati):
            violations += 1
    return violations


def scan_state(cset, tokens: list[str]):
    """Rebuild the incremental tracking state of a prefix from scratch."""
    from genloop.constraints import ConstraintState, PhraseLiteral

    states = []
    for clause in cset.clauses:
        for lit in clause:
            if isinstance(lit, PhraseLiteral):
                states.append((scan_match_position(tokens, lit.tokens),
                               scan_occurrences(tokens, lit.tokens) > 0))
            else:
                count = sum(scan_occurrences(tokens, p) for p in lit.phrases)
                positions = tuple(scan_match_position(tokens, p)
                                  for p in lit.phrases if len(p) > 1)
                states.append((count, positions))
    return ConstraintState(tuple(states))


# -- exhaustive decode optimum ------------------------------------------------

def enumerate_terminals(model, prompt: tuple[int, ...], cset, cfg):
    """Every terminal sequence the beam search could produce, with its score.

    Returns (key, core_tokens, ended_eos, logprob, violations, score) sorted
    by the decoder's ranking key. Log-probabilities are accumulated stepwise
    in extension order so float paths match the beam exactly.
    """
    vocab = model.vocab
    expandable = [t for t in range(len(vocab))
                  if t not in (vocab.bos_id, vocab.eos_id, vocab.unk_id)]
    results = []

    def score_terminal(tokens, logprob, ended_eos):
        words = [vocab.tokens[t] for t in tokens]
        v = scan_violations(cset, words, True)
        s = logprob / (max(1, len(tokens)) ** cfg.length_penalty) - cfg.lam * v
        results.append(((-s, tuple(tokens), ended_eos), tuple(tokens), ended_eos,
                        logprob, v, s))

    def walk(tokens, logprob):
        depth = len(tokens)
        if depth >= cfg.min_len and depth < cfg.max_len:
            lp_eos = logprob + float(model.next_token_logprobs(prompt + tokens)[vocab.eos_id])
            score_terminal(tokens, lp_eos, True)
        if depth == cfg.max_len:
            score_terminal(tokens, logprob, False)
            return
        vec = model.next_token_logprobs(prompt + tokens)
        for t in expandable:
            walk(tokens + (t,), logprob + float(vec[t]))

    walk((), 0.0)
    results.sort(key=lambda r: r[0])
    return results


# -- plain beam search (no constraint machinery at all) ----------------------

def plain_beam_search(model, prompt: tuple[int, ...], beam_size: int, num_returns: int,
                      max_len: int, min_len: int, length_penalty: float):
    """Classic beam search; returns (tokens, logprob, score) ranked."""
    vocab = model.vocab
    expandable = [t for t in range(len(vocab))
                  if t not in (vocab.bos_id, vocab.eos_id, vocab.unk_id)]

    def norm(lp, n):
        return lp / (max(1, n) ** length_penalty)

    active = [((), 0.0)]
    done = []
    while active:
        pool = []
        for tokens, lp in active:
            vec = model.next_token_logprobs(prompt + tokens)
            if len(tokens) >= min_len:
                pool.append((tokens, lp + float(vec[vocab.eos_id]), True))
            for t in expandable:
                pool.append((tokens + (t,), lp + float(vec[t]), False))
        pool.sort(key=lambda c: (-norm(c[1], len(c[0])), c[0], c[2]))
        pool = pool[:beam_size]
        active = []
        for tokens, lp, ended in pool:
            if ended or len(tokens) >= max_len:
                done.append((tokens, lp, ended))
            else:
                active.append((tokens, lp))
    done.sort(key=lambda c: (-norm(c[1], len(c[0])), c[0], c[2]))
    return [(tokens, lp, norm(lp, len(tokens))) for tokens, lp, _ in done[:num_returns]]


# -- average precision by per-item counting ----------------------------------

def per_item_average_precision(items) -> float:
    """AP as the mean over valid items of their tie-bucketed precision."""
    n_valid = sum(1 for it in items if it.valid)
    total = 0.0
    for it in items:
        if not it.valid:
            continue
        above = [o for o in items if o.score > it.score]
        tied = [o for o in items if o.score == it.score]
        precision = ((sum(1 for o in above if o.valid) + sum(1 for o in tied if o.valid))
                     / (len(above) + len(tied)))
        total += precision
    return total / n_valid


# -- independent sentence BLEU ------------------------------------------------

def reference_bleu(candidate_tokens: list[str], reference_token_lists: list[list[str]],
                   max_n: int = 4, eps: float = 0.1) -> float:
    """Second BLEU implementation: per-order clipped precision, skip-short orders."""
    assert candidate_tokens
    log_precisions = []
    for n in range(1, max_n + 1):
        cand_grams = [tuple(candidate_tokens[i:i + n])
                      for i in range(len(candidate_tokens) - n + 1)]
        if not cand_grams:
            break
        matched = 0
        for gram, c in Counter(cand_grams).items():
            best = 0
            for ref in reference_token_lists:
                ref_grams = [tuple(ref[i:i + n]) for i in range(len(ref) - n + 1)]
                best = max(best, ref_grams.count(gram))
            matched += min(c, best)
        if n == 1 and matched == 0:
            return 0.0
        log_precisions.append(math.log(matched / len(cand_grams) if matched
                                       else eps / len(cand_grams)))
    c = len(candidate_tokens)
    r = sorted((abs(len(ref) - c), len(ref)) for ref in reference_token_lists)[0][1]
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return brevity * math.exp(sum(log_precisions) / len(log_precisions))
