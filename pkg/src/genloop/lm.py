"""Autoregressive scorers.

The decoder only needs one thing from a language model: a full
next-token log-probability vector for a given prefix. Everything in this
module satisfies that contract:

* ``NGramModel`` -- the re-trainable reference model: an interpolated
  absolute-discount n-gram model whose "fine-tuning" is exact weighted
  count accumulation. Deterministic, auditable, fast enough to decode
  thousands of prompts on one core.
* ``UniformModel`` -- the trivial scorer used in tests and examples.
* ``TableModel`` -- a table-driven scorer whose distributions are read
  from a JSON spec and selected by an integer hash of the prefix. It is
  the in-process twin of the external-bridge test model: any runtime that
  parses the same spec file produces bit-identical vectors.

Conventions: sequences are tuples of token ids over a fixed
``Vocabulary`` with reserved BOS/EOS/UNK sentinels. BOS only ever
appears as left padding inside the model; EOS is a real predicted token
terminating sequences. Every distribution is smoothed down to a uniform
base, so all probabilities are strictly positive and each vector's
exponentials sum to 1 within 1e-9.
"""

from __future__ import annotations

import json
import logging
import math
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import ConfigError, InputError
from .text import tokenize

logger = logging.getLogger(__name__)

BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"

MODEL_FORMAT = "genloop-ngram"
MODEL_VERSION = 1

Ids = tuple[int, ...]


class Vocabulary:
    """Bijection between surface tokens and dense integer ids.

    The three sentinels are always present; all other tokens are plain
    lowercase strings as produced by ``text.tokenize``.
    """

    __slots__ = ("tokens", "_ids", "bos_id", "eos_id", "unk_id")

    def __init__(self, tokens: Sequence[str]):
        self.tokens = tuple(tokens)
        self._ids = {t: i for i, t in enumerate(self.tokens)}
        if len(self._ids) != len(self.tokens):
            raise InputError("vocabulary contains duplicate tokens")
        for sentinel in (BOS, EOS, UNK):
            if sentinel not in self._ids:
                raise InputError(f"vocabulary is missing sentinel {sentinel!r}")
        self.bos_id = self._ids[BOS]
        self.eos_id = self._ids[EOS]
        self.unk_id = self._ids[UNK]

    @classmethod
    def build(cls, texts: Iterable[str]) -> "Vocabulary":
        """Collect a vocabulary from raw text lines (sorted, sentinels first)."""
        seen: set[str] = set()
        for text in texts:
            seen.update(tokenize(text))
        seen -= {BOS, EOS, UNK}
        return cls((BOS, EOS, UNK, *sorted(seen)))

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id(self, token: str) -> int:
        """Strict lookup; unknown tokens are an error (use encode for UNK mapping)."""
        try:
            return self._ids[token]
        except KeyError:
            raise InputError(f"token {token!r} not in vocabulary") from None

    def encode_tokens(self, tokens: Iterable[str]) -> Ids:
        unk = self.unk_id
        return tuple(self._ids.get(t, unk) for t in tokens)

    def encode(self, text: str) -> Ids:
        """Tokenize and map to ids, unknown words to UNK."""
        return self.encode_tokens(tokenize(text))

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.token(i) for i in ids]

    def token(self, i: int) -> str:
        if not 0 <= i < len(self.tokens):
            raise InputError(f"token id {i} out of range")
        return self.tokens[i]


def validate_sequence(vocab: Vocabulary, ids: Sequence[int], allow_eos: bool = True) -> None:
    """Check the token-sequence invariants: valid ids, EOS at most once and terminal."""
    n = len(vocab)
    for pos, i in enumerate(ids):
        if not isinstance(i, (int, np.integer)) or not 0 <= i < n:
            raise InputError(f"invalid token id {i!r} at position {pos}")
        if i == vocab.eos_id:
            if not allow_eos:
                raise InputError("EOS not allowed here")
            if pos != len(ids) - 1:
                raise InputError("EOS must be the final token")


@runtime_checkable
class Scorer(Protocol):
    """The contract every generator model must satisfy."""

    vocab: Vocabulary

    def next_token_logprobs(self, prefix: Sequence[int]) -> np.ndarray:
        """Log-probability vector over the full vocabulary given the prefix."""
        ...


def sequence_logprob(model: Scorer, ids: Sequence[int]) -> float:
    """Chain-rule log-probability of a sequence.

    Literally the fold of next_token_logprobs, so it is exactly consistent
    (same floating-point path) with step-by-step accumulation elsewhere.
    """
    if len(ids) == 0:
        raise InputError("cannot score an empty sequence")
    validate_sequence(model.vocab, ids)
    total = 0.0
    for i in range(len(ids)):
        total += float(model.next_token_logprobs(ids[:i])[ids[i]])
    return total


def per_word_perplexity(model: Scorer, text: str) -> float:
    """exp of the negative mean token log-probability of the tokenized text."""
    toks = tokenize(text)
    if not toks:
        raise InputError("text has no tokens")
    ids = model.vocab.encode_tokens(toks)
    return math.exp(-sequence_logprob(model, ids) / len(ids))


class UniformModel:
    """Assigns every token the same probability in every context."""

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab
        self._vec = np.full(len(vocab), -math.log(len(vocab)))
        self._vec.flags.writeable = False

    def next_token_logprobs(self, prefix: Sequence[int]) -> np.ndarray:
        validate_sequence(self.vocab, prefix, allow_eos=False)
        return self._vec


class TableModel:
    """Table-driven deterministic scorer.

    The prefix selects a row by integer hashing (``h = (h * multiplier +
    id + 1) mod n_rows``, starting from 0), which any runtime reproduces
    exactly; the rows themselves come verbatim from the spec file, so two
    implementations of this model agree bit for bit.
    """

    def __init__(self, vocab: Vocabulary, tables: np.ndarray, multiplier: int = 31):
        tables = np.asarray(tables, dtype=np.float64)
        if tables.ndim != 2 or tables.shape[1] != len(vocab):
            raise ConfigError("tables must be (n_rows, |vocab|)")
        sums = np.exp(tables).sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6):
            raise ConfigError("table rows must be normalized log-distributions")
        self.vocab = vocab
        self.tables = tables
        self.tables.flags.writeable = False
        self.multiplier = int(multiplier)

    def bucket(self, prefix: Sequence[int]) -> int:
        h = 0
        n = self.tables.shape[0]
        for t in prefix:
            h = (h * self.multiplier + int(t) + 1) % n
        return h

    def next_token_logprobs(self, prefix: Sequence[int]) -> np.ndarray:
        validate_sequence(self.vocab, prefix, allow_eos=False)
        return self.tables[self.bucket(prefix)]

    def to_spec(self) -> dict:
        return {
            "format": "genloop-table-model",
            "version": 1,
            "tokens": list(self.vocab.tokens),
            "multiplier": self.multiplier,
            "tables": [[float(x) for x in row] for row in self.tables],
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "TableModel":
        if spec.get("format") != "genloop-table-model" or spec.get("version") != 1:
            raise InputError("not a v1 table-model spec")
        return cls(Vocabulary(spec["tokens"]), np.array(spec["tables"]), spec.get("multiplier", 31))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_spec(), f, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "TableModel":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_spec(json.load(f))


class NGramModel:
    """Interpolated absolute-discount n-gram model.

    Each order's distribution discounts every observed count by a fixed
    amount and hands the freed mass to the next-lower order, bottoming
    out at the uniform distribution. The back-off weight is derived from
    the mass actually removed (not the usual D*N1+/c shortcut), which
    stays exactly normalized even for the fractional counts produced by
    weighted fine-tuning.

    Models are immutable: fit and finetune build new instances, and the
    per-context distribution cache makes concurrent decoding reads cheap.
    """

    def __init__(self, vocab: Vocabulary, order: int, discount: float,
                 counts: dict[Ids, dict[int, float]]):
        if order < 1:
            raise ConfigError(f"order must be >= 1, got {order}")
        if not 0.0 < discount < 1.0:
            raise ConfigError(f"discount must be in (0, 1), got {discount}")
        self.vocab = vocab
        self.order = int(order)
        self.discount = float(discount)
        self._counts = counts
        self._totals = {ctx: float(sum(t.values())) for ctx, t in counts.items()}
        self._cache: dict[Ids, np.ndarray] = {}

    # -- scoring ---------------------------------------------------------

    def _context(self, prefix: Sequence[int]) -> Ids:
        padded = (self.vocab.bos_id,) * (self.order - 1) + tuple(prefix)
        if self.order == 1:
            return ()
        return padded[len(padded) - (self.order - 1):]

    def _probs(self, ctx: Ids) -> np.ndarray:
        """Distribution for one context, interpolating suffixes bottom-up."""
        size = len(self.vocab)
        vec = np.full(size, 1.0 / size)
        for length in range(0, len(ctx) + 1):
            sub = ctx[len(ctx) - length:]
            table = self._counts.get(sub)
            if not table:
                continue
            total = self._totals[sub]
            level = np.zeros(size)
            kept = 0.0
            for tok, c in table.items():
                d = c - self.discount
                if d > 0.0:
                    level[tok] = d / total
                    kept += d
            gamma = (total - kept) / total
            vec = level + gamma * vec
        return vec

    def next_token_logprobs(self, prefix: Sequence[int]) -> np.ndarray:
        validate_sequence(self.vocab, prefix, allow_eos=False)
        ctx = self._context(prefix)
        cached = self._cache.get(ctx)
        if cached is None:
            cached = np.log(self._probs(ctx))
            cached.flags.writeable = False
            self._cache[ctx] = cached
        return cached

    # -- persistence ------------------------------------------------------

    def save(self, path) -> None:
        """Write the versioned line-based count-table format (stable across releases)."""
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"{MODEL_FORMAT} {MODEL_VERSION}\n")
            f.write(f"order {self.order}\n")
            f.write(f"discount {self.discount!r}\n")
            f.write(f"tokens {len(self.vocab)}\n")
            for t in self.vocab.tokens:
                f.write(t + "\n")
            f.write(f"contexts {len(self._counts)}\n")
            for ctx in sorted(self._counts):
                table = self._counts[ctx]
                cells = " ".join(f"{tok}:{count!r}" for tok, count in sorted(table.items()))
                f.write(" ".join(map(str, ctx)) + "\t" + cells + "\n")

    @classmethod
    def load(cls, path) -> "NGramModel":
        with open(path, "r", encoding="utf-8") as f:
            header = f.readline().split()
            if header[:1] != [MODEL_FORMAT] or header[1:] != [str(MODEL_VERSION)]:
                raise InputError(f"unrecognized model file header: {' '.join(header)}")
            order = int(_expect(f, "order"))
            discount = float(_expect(f, "discount"))
            n_tokens = int(_expect(f, "tokens"))
            tokens = [f.readline().rstrip("\n") for _ in range(n_tokens)]
            n_contexts = int(_expect(f, "contexts"))
            counts: dict[Ids, dict[int, float]] = {}
            for _ in range(n_contexts):
                line = f.readline().rstrip("\n")
                ctx_part, _, cells = line.partition("\t")
                ctx = tuple(int(x) for x in ctx_part.split()) if ctx_part else ()
                table: dict[int, float] = {}
                for cell in cells.split():
                    tok, _, count = cell.partition(":")
                    table[int(tok)] = float(count)
                counts[ctx] = table
        return cls(Vocabulary(tokens), order, discount, counts)


def _expect(f, key: str) -> str:
    line = f.readline().split(None, 1)
    if not line or line[0] != key:
        raise InputError(f"model file: expected {key!r} line")
    return line[1].strip() if len(line) > 1 else ""


def _accumulate(counts: dict[Ids, dict[int, float]], vocab: Vocabulary, order: int,
                seq: Sequence[int], weight: float) -> None:
    seq = tuple(seq)
    if seq and seq[-1] == vocab.eos_id:
        seq = seq[:-1]
    validate_sequence(vocab, seq, allow_eos=False)
    padded = (vocab.bos_id,) * (order - 1) + seq + (vocab.eos_id,)
    for pos in range(order - 1, len(padded)):
        tok = padded[pos]
        for length in range(order):
            ctx = padded[pos - length:pos]
            table = counts.setdefault(ctx, {})
            table[tok] = table.get(tok, 0.0) + weight


def _canonical(counts: dict[Ids, dict[int, float]]) -> dict[Ids, dict[int, float]]:
    # Sorted storage makes save/load and fit paths produce identical float
    # summation orders, which keeps runs byte-reproducible.
    return {ctx: dict(sorted(counts[ctx].items())) for ctx in sorted(counts)}


def fit(corpus: Iterable[Sequence[int]], vocab: Vocabulary,
        order: int = 3, discount: float = 0.75) -> NGramModel:
    """Count all n-grams of orders 1..order over the corpus (EOS appended, BOS padded)."""
    if order < 1:
        raise ConfigError(f"order must be >= 1, got {order}")
    counts: dict[Ids, dict[int, float]] = {}
    n = 0
    for seq in corpus:
        _accumulate(counts, vocab, order, seq, 1.0)
        n += 1
    if n == 0:
        raise InputError("cannot fit on an empty corpus")
    return NGramModel(vocab, order, discount, _canonical(counts))


def finetune(model: NGramModel, data: Iterable[Sequence[int]],
             mix_weight: float = 1.0) -> NGramModel:
    """New model with the data's counts added at mix_weight; the input model is untouched."""
    if mix_weight <= 0.0:
        raise ConfigError(f"mix_weight must be positive, got {mix_weight}")
    counts = {ctx: dict(table) for ctx, table in model._counts.items()}
    n = 0
    for seq in data:
        _accumulate(counts, model.vocab, model.order, seq, mix_weight)
        n += 1
    if n == 0:
        logger.warning("finetune called with no data; returning the model unchanged")
        return model
    return NGramModel(model.vocab, model.order, model.discount, _canonical(counts))


def fit_texts(lines: Iterable[str], order: int = 3, discount: float = 0.75,
              vocab: Vocabulary | None = None) -> NGramModel:
    """Convenience: build a vocabulary (unless given) and fit on raw text lines."""
    lines = [line for line in lines if line.strip()]
    if vocab is None:
        vocab = Vocabulary.build(lines)
    return fit((vocab.encode(line) for line in lines), vocab, order, discount)


def finetune_texts(model: NGramModel, lines: Iterable[str], mix_weight: float = 1.0) -> NGramModel:
    """Finetune on raw text lines encoded with the model's own vocabulary."""
    return finetune(model, (model.vocab.encode(line) for line in lines if line.strip()),
                    mix_weight)
