"""Shared tokenization.

Statements are handled as lowercase word/punctuation token streams
everywhere (language model, constraints, BLEU), so the one tokenizer
lives here. No subword modeling: a token is a run of letters, digits and
apostrophes, or a single punctuation mark.
"""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[a-z0-9']+|[^\sa-z0-9']")
_TIGHT_RE = re.compile(r"\s+([,.;:!?%)\]])")


def tokenize(text: str) -> list[str]:
    """Lowercase and split into word and punctuation tokens."""
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens) -> str:
    """Inverse of tokenize up to whitespace: no space before closing punctuation."""
    return _TIGHT_RE.sub(r"\1", " ".join(tokens))
