"""Penalized beam search under CNF constraints.

The search objective for a finished continuation y given prompt x is

    score(y) = logprob(y | x) / len(y)**length_penalty  -  lambda * violations(y)

where violations(y) is the number of unsatisfied constraint clauses at
end of sequence. Violations are soft penalties, never hard prunes: a
search space with no satisfying sequence still produces output, just
heavily down-ranked. Mid-search, unfinished hypotheses are charged only
for clauses that are already irrecoverable, so a hypothesis that merely
has not finished a positive phrase yet is not punished.

Everything is deterministic: ties break lexicographically on the token
id sequence, and batch decoding yields the same stream for any worker
count.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

from .constraints import ConstraintSet, SATISFIED
from .errors import ConfigError, InputError
from .lm import Scorer, validate_sequence
from .text import detokenize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecoderConfig:
    beam_size: int = 10
    num_returns: int = 10
    max_len: int = 30
    min_len: int = 2
    length_penalty: float = 0.1
    lam: float = 20.0
    diversity_bucketing: bool = False

    def __post_init__(self):
        if self.beam_size < 1:
            raise ConfigError("beam_size must be >= 1")
        if not 1 <= self.num_returns <= self.beam_size:
            raise ConfigError("need 1 <= num_returns <= beam_size")
        if self.min_len < 0 or self.min_len > self.max_len or self.max_len < 1:
            raise ConfigError("need 0 <= min_len <= max_len and max_len >= 1")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")


@dataclass(frozen=True)
class Hypothesis:
    """A beam item: continuation-so-far, accumulated logprob, constraint state."""

    tokens: tuple[int, ...]
    logprob: float
    state: ConstraintState
    finished: bool
    ended_eos: bool


@dataclass(frozen=True)
class Generation:
    """A decoded statement with its provenance and score accounting."""

    job: str
    prompt: str
    continuation: str
    text: str
    logprob: float
    violations: int
    score: float
    critic: float | None = None
    iteration: int | None = None

    def to_json(self) -> str:
        obj = {"job": self.job, "prompt": self.prompt, "continuation": self.continuation,
               "text": self.text, "logprob": self.logprob, "violations": self.violations,
               "score": self.score}
        if self.critic is not None:
            obj["critic"] = self.critic
        if self.iteration is not None:
            obj["iteration"] = self.iteration
        return json.dumps(obj, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "Generation":
        obj = json.loads(line)
        return cls(obj["job"], obj["prompt"], obj["continuation"], obj["text"],
                   obj["logprob"], obj["violations"], obj["score"],
                   obj.get("critic"), obj.get("iteration"))


@dataclass(frozen=True)
class DecodeJob:
    job: str
    prompt: str
    constraints: ConstraintSet


def _norm(logprob: float, length: int, penalty: float) -> float:
    return logprob / (max(1, length) ** penalty)


def hypothesis_score(h: Hypothesis, cset: ConstraintSet, cfg: DecoderConfig) -> float:
    """Length-normalized logprob minus the clause penalty (terminal iff finished)."""
    v = cset.violation_count(h.state, terminal=h.finished)
    return _norm(h.logprob, len(h.tokens), cfg.length_penalty) - cfg.lam * v


def _rank_key(h: Hypothesis, cset: ConstraintSet, cfg: DecoderConfig):
    return (-hypothesis_score(h, cset, cfg), h.tokens, h.ended_eos)


def _signature(h: Hypothesis, cset: ConstraintSet) -> tuple[bool, ...]:
    return tuple(s == SATISFIED for s in cset.clause_status(h.state, terminal=False))


def _spread_by_signature(ranked: list[Hypothesis], cset: ConstraintSet, width: int) -> list[Hypothesis]:
    """Round-robin beam slots across satisfied-clause signatures, best first."""
    groups: dict[tuple[bool, ...], list[Hypothesis]] = {}
    order: list[tuple[bool, ...]] = []
    for h in ranked:
        sig = _signature(h, cset)
        if sig not in groups:
            groups[sig] = []
            order.append(sig)
        groups[sig].append(h)
    out: list[Hypothesis] = []
    depth = 0
    while len(out) < width:
        took = False
        for sig in order:
            bucket = groups[sig]
            if depth < len(bucket):
                out.append(bucket[depth])
                took = True
                if len(out) == width:
                    break
        if not took:
            break
        depth += 1
    return out


def step(beam: Sequence[Hypothesis], model: Scorer, cset: ConstraintSet,
         cfg: DecoderConfig, prompt: Sequence[int] = ()) -> list[Hypothesis]:
    """Expand every hypothesis one token and keep the top beam_size successors.

    EOS is a successor only past min_len; hitting max_len freezes a
    hypothesis in place. Newly violated clauses down-weight a successor
    through the penalty term rather than dropping it.
    """
    if not beam:
        raise InputError("step requires a non-empty beam")
    if any(h.finished for h in beam):
        raise InputError("step requires all hypotheses unfinished")
    vocab = model.vocab
    prompt = tuple(prompt)
    candidates: list[Hypothesis] = []
    for h in beam:
        lps = model.next_token_logprobs(prompt + h.tokens)
        for tok in range(len(vocab)):
            if tok == vocab.bos_id or tok == vocab.unk_id:
                continue  # sentinels are never emitted as surface text
            lp = h.logprob + float(lps[tok])
            if tok == vocab.eos_id:
                if len(h.tokens) >= cfg.min_len:
                    candidates.append(Hypothesis(h.tokens, lp, h.state, True, True))
                continue
            state = cset.advance(h.state, vocab.tokens[tok])
            done = len(h.tokens) + 1 >= cfg.max_len
            candidates.append(Hypothesis(h.tokens + (tok,), lp, state, done, False))
    candidates.sort(key=lambda c: _rank_key(c, cset, cfg))
    if cfg.diversity_bucketing:
        return _spread_by_signature(candidates, cset, cfg.beam_size)
    return candidates[:cfg.beam_size]


def decode(model: Scorer, prompt: Sequence[int], cset: ConstraintSet, cfg: DecoderConfig,
           job: str = "", prompt_text: str | None = None) -> list[Generation]:
    """Run the search for one prompt; ranked finished hypotheses as Generations."""
    validate_sequence(model.vocab, prompt, allow_eos=False)
    if prompt_text is None:
        prompt_text = detokenize(model.vocab.decode(prompt))
    start = Hypothesis((), 0.0, cset.initial_state(), False, False)
    active = [start]
    finished: list[Hypothesis] = []
    while active:
        kept = step(active, model, cset, cfg, prompt)
        active = []
        for h in kept:
            (finished if h.finished else active).append(h)
    finished.sort(key=lambda h: _rank_key(h, cset, cfg))
    if not finished:
        logger.warning("decode(job=%s): no hypothesis reached min_len %d within max_len %d",
                       job, cfg.min_len, cfg.max_len)
        return []
    out = []
    for h in finished[:cfg.num_returns]:
        cont_tokens = model.vocab.decode(h.tokens)
        continuation = detokenize(cont_tokens)
        text = detokenize(model.vocab.decode(prompt) + cont_tokens)
        out.append(Generation(
            job=job, prompt=prompt_text, continuation=continuation, text=text,
            logprob=h.logprob,
            violations=cset.violation_count(h.state, terminal=True),
            score=hypothesis_score(h, cset, cfg)))
    return out


def _run_job(model: Scorer, job: DecodeJob, cfg: DecoderConfig):
    try:
        ids = model.vocab.encode(job.prompt)
        return decode(model, ids, job.constraints, cfg, job=job.job, prompt_text=job.prompt), None
    except Exception as exc:  # per-job isolation: one bad job must not kill the batch
        return None, exc


def batch_decode(model: Scorer, jobs: Sequence, cfg: DecoderConfig,
                 parallelism: int = 1,
                 on_error: Callable[[DecodeJob, Exception], None] | None = None,
                 ) -> Iterator[Generation]:
    """Decode many jobs, yielding generations in job order.

    Jobs are DecodeJob instances or (prompt_text, ConstraintSet) pairs.
    The model is shared read-only across workers; output order and
    content are independent of parallelism. Failing jobs are reported
    (log + optional callback) and skipped.
    """
    if not jobs:
        raise InputError("batch_decode requires at least one job")
    norm: list[DecodeJob] = []
    for i, j in enumerate(jobs):
        if isinstance(j, DecodeJob):
            norm.append(j)
        else:
            prompt, cset = j
            norm.append(DecodeJob(str(i), prompt, cset))
    if parallelism <= 1:
        results = (_run_job(model, j, cfg) for j in norm)
    else:
        pool = ThreadPoolExecutor(max_workers=parallelism)
        results = pool.map(lambda j: _run_job(model, j, cfg), norm)
    for job, (gens, exc) in zip(norm, results):
        if exc is not None:
            logger.warning("decode job %s failed: %s", job.job, exc)
            if on_error is not None:
                on_error(job, exc)
            continue
        yield from gens


def write_jsonl(generations: Iterable[Generation], fh) -> int:
    n = 0
    for g in generations:
        fh.write(g.to_json() + "\n")
        n += 1
    return n


def read_jsonl(fh) -> Iterator[Generation]:
    for line in fh:
        line = line.strip()
        if line:
            yield Generation.from_json(line)
