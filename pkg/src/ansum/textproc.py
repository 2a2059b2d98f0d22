"""Deterministic text utilities: word tokenization, sentence splitting,
and type-level unigram overlap.

Token lists are plain ``list[str]`` of lowercase words. All functions are
pure and safe to call concurrently.
"""

from __future__ import annotations

import re
import unicodedata

# Words that end with a period without ending a sentence. Deliberately
# small and fixed so splitting stays deterministic and auditable.
ABBREVIATIONS = frozenset(
    {
        "dr",
        "mr",
        "mrs",
        "ms",
        "prof",
        "st",
        "jr",
        "sr",
        "vs",
        "etc",
        "e.g",
        "i.e",
        "fig",
        "al",
        "inc",
        "ltd",
        "u.s",
    }
)

# Terminator (with optional closing quotes/brackets), separating whitespace,
# and a lookahead for the start of the next sentence.
_BOUNDARY = re.compile(r"([.?!][\"')\]]*)(\s+)(?=[\"'(\[]?[A-Z])")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and _is_punct(token[start]):
        start += 1
    while end > start and _is_punct(token[end - 1]):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, and strip surrounding punctuation.

    Tokens that are punctuation-only are dropped; interior punctuation
    (e.g. "u.s", "don't") is kept.
    """
    tokens = []
    for raw in text.lower().split():
        tok = _strip_punct(raw)
        if tok:
            tokens.append(tok)
    return tokens


def unigram_overlap(a: str, b: str) -> float:
    """Fraction of a's token types that also occur in b.

    Type-based on purpose: repeating a word changes nothing. Returns 0.0
    when a has no tokens.
    """
    types_a = set(tokenize(a))
    if not types_a:
        return 0.0
    types_b = set(tokenize(b))
    return len(types_a & types_b) / len(types_a)


def split_sentences(text: str) -> list[str]:
    """Split text into sentences at ``.?!`` followed by a capitalized start.

    A terminator preceded by a known abbreviation is not a boundary.
    Joining the output with single spaces reproduces the input modulo
    whitespace.
    """
    stripped = text.strip()
    if not stripped:
        return []
    sentences = []
    start = 0
    for m in _BOUNDARY.finditer(stripped):
        before = re.search(r"(\S+)$", stripped[: m.end(1)])
        if before is not None:
            word = before.group(1).rstrip(".?!\"')]").lstrip("\"'([").lower()
            if word in ABBREVIATIONS:
                continue
        sentences.append(stripped[start : m.end(1)])
        start = m.end(2)
    tail = stripped[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences
