"""Make the leading summary sentence stand alone.

Gating decides when a rewrite is worth attempting (the answer's opening
sentence is missing from the summary, so the summary may start mid-
discourse). The rewrite itself goes to an external editing endpoint, with
a rule-based anaphor substitution as offline fallback.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass
from typing import Sequence

from .corpus import QAExample
from .errors import AnsumError, DataError, EndpointError
from .extract import SummaryCandidate
from .textproc import tokenize

logger = logging.getLogger(__name__)

START_TOKEN = "[CLS]"
SEPARATOR = "[s]"
RESPONSE_SEPARATOR = "[SEP]"


class Category(enum.Enum):
    DONE = "done"
    UNNECESSARY = "unnecessary"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class DecontextRequest:
    title: str
    sentences: tuple[str, ...]
    target_index: int

    def __post_init__(self):
        if not self.title.strip():
            raise DataError("decontextualization request requires a non-empty title")
        if not 0 <= self.target_index < len(self.sentences):
            raise DataError(
                f"target index {self.target_index} out of range for {len(self.sentences)} sentences"
            )

    @property
    def target(self) -> str:
        return self.sentences[self.target_index]


@dataclass(frozen=True)
class DecontextResult:
    category: Category
    text: str
    original: str
    edited: bool

    def __post_init__(self):
        if self.edited != (self.category is Category.DONE):
            raise AnsumError("edited flag must mirror the Done category")
        if not self.edited and self.text != self.original:
            raise AnsumError("non-edited results must keep the original sentence")

    @classmethod
    def make(cls, category: Category, original: str, rewritten: str | None = None) -> "DecontextResult":
        if category is Category.DONE:
            return cls(category, rewritten if rewritten is not None else original, original, edited=True)
        return cls(category, original, original, edited=False)


@dataclass
class EditStats:
    count: int
    pct_unnecessary: float
    pct_infeasible: float
    pct_done: float
    mean_length_increase_pct: float | None


def should_decontextualize(example: QAExample, selected: set[int] | frozenset[int]) -> int | None:
    """Return the summary's first sentence index when the answer's opening
    sentence is not part of the summary, else None."""
    if not selected:
        raise DataError("selected set must be non-empty")
    return None if 0 in selected else min(selected)


def title_for(example: QAExample) -> str:
    """Page title when the dataset provides one, else the question."""
    if example.title and example.title.strip():
        return example.title
    return example.question


def serialize_request(req: DecontextRequest) -> str:
    """Render the editing-endpoint input: start token, title, then the
    pre-context, target, and post-context segments, separator-delimited.
    Empty context segments are dropped so separators never double up."""
    pre = " ".join(req.sentences[: req.target_index])
    post = " ".join(req.sentences[req.target_index + 1 :])
    segments = [req.title]
    if pre:
        segments.append(pre)
    segments.append(req.target)
    if post:
        segments.append(post)
    joined = f" {SEPARATOR} ".join(segments)
    return f"{START_TOKEN} {joined} {SEPARATOR}"


def parse_response(payload: str, original: str) -> DecontextResult:
    """Parse "[CATEGORY] [SEP] y". Unnecessary/Infeasible keep the
    original sentence regardless of the payload text."""
    if RESPONSE_SEPARATOR not in payload:
        raise DataError(f"decontextualizer output missing {RESPONSE_SEPARATOR}: {payload!r}")
    head, _, body = payload.partition(RESPONSE_SEPARATOR)
    name = head.strip().lower()
    try:
        category = Category(name)
    except ValueError:
        raise DataError(f"unknown decontextualization category {head.strip()!r}") from None
    if category is Category.DONE:
        return DecontextResult.make(category, original, body.strip())
    return DecontextResult.make(category, original)


# Sentence-initial words treated as anaphors needing an antecedent.
SINGULAR_ANAPHORS = frozenset({"it", "this", "that", "he", "she", "there"})
PLURAL_ANAPHORS = frozenset({"they", "these", "those"})

# After "this"/"these", these words mean the determiner stands alone
# ("This is why...") rather than heading a noun phrase ("These parts...").
_NON_NOUN_FOLLOWERS = frozenset(
    "is are was were will would can could may might should must has have had "
    "does did also often usually then thus therefore means happens".split()
)

_FIRST_WORD = re.compile(r"([A-Za-z']+)")
_TWO_WORDS = re.compile(r"([A-Za-z']+)(\s+)([A-Za-z'-]+)")

_DETERMINERS = r"(?:the|a|an|his|her|their|its|our)"
_WORD = r"[A-Za-z'-]+"
_COORDINATED = re.compile(
    rf"\b{_DETERMINERS}\s+{_WORD}(?:\s*,\s*{_WORD})*,?\s+and\s+{_WORD}", re.IGNORECASE
)
_SIMPLE_NP = re.compile(rf"\b(?:the|a|an)\s+{_WORD}", re.IGNORECASE)
_PROPER = re.compile(r"\b[A-Z][a-z]+(?:\s+[A-Z][a-z]+)*\b")


def _anaphor_span(sentence: str) -> tuple[int, bool] | None:
    """Detect a sentence-initial anaphor; returns (span end, plural)."""
    m = _FIRST_WORD.match(sentence)
    if not m:
        return None
    first = m.group(1).lower()
    if first in {"this", "these"}:
        m2 = _TWO_WORDS.match(sentence)
        if m2 and m2.group(3).lower() not in _NON_NOUN_FOLLOWERS:
            return m2.end(3), first == "these"
        return m.end(1), first == "these"
    if first in SINGULAR_ANAPHORS:
        return m.end(1), False
    if first in PLURAL_ANAPHORS:
        return m.end(1), True
    return None


def _is_plural(phrase: str) -> bool:
    if re.search(r"\band\b", phrase, re.IGNORECASE):
        return True
    head = phrase.split()[-1].lower()
    return head.endswith("s") and not head.endswith("ss")


def _noun_phrase_candidates(context_sentences: Sequence[str], plural: bool) -> list[str]:
    """Determiner/capitalization heuristic for antecedent candidates of
    the requested number, deduplicated case-insensitively."""
    candidates: list[str] = []
    for sentence in context_sentences:
        masked = sentence
        for m in _COORDINATED.finditer(sentence):
            candidates.append(m.group(0))
            masked = masked[: m.start()] + " " * (m.end() - m.start()) + masked[m.end() :]
        for m in _SIMPLE_NP.finditer(masked):
            candidates.append(m.group(0))
        for m in _PROPER.finditer(masked):
            if m.start() > 0:
                candidates.append(m.group(0))
    seen = set()
    matching = []
    for cand in candidates:
        key = cand.lower()
        if key in seen:
            continue
        seen.add(key)
        if _is_plural(cand) == plural:
            matching.append(cand)
    return matching


def rule_based_decontext(req: DecontextRequest) -> DecontextResult:
    """Substitute a sentence-initial anaphor with its antecedent when the
    preceding context offers exactly one number-compatible noun phrase.

    No anaphor means the sentence already stands alone (Unnecessary); an
    ambiguous or missing antecedent is Infeasible. Everything after the
    anaphor span is preserved verbatim.
    """
    target = req.target
    span = _anaphor_span(target)
    if span is None:
        return DecontextResult.make(Category.UNNECESSARY, target)
    span_end, plural = span
    context = req.sentences[: req.target_index]
    candidates = _noun_phrase_candidates(context, plural)
    if len(candidates) != 1:
        return DecontextResult.make(Category.INFEASIBLE, target)
    antecedent = candidates[0]
    rewritten = antecedent + target[span_end:]
    rewritten = rewritten[0].upper() + rewritten[1:]
    return DecontextResult.make(Category.DONE, target, rewritten)


def decontextualize(
    example: QAExample,
    selected: set[int] | frozenset[int],
    backend="rules",
    system: str | None = None,
) -> tuple[SummaryCandidate, DecontextResult | None]:
    """Gate, rewrite the first summary sentence, and splice the rewrite
    back into the rendered summary.

    `backend` is either the string "rules" or a completion client for the
    editing endpoint. Endpoint failures degrade to the rule-based editor,
    and any residual failure degrades to Unnecessary; this function does
    not raise for backend trouble.
    """
    backend_tag = "rules" if backend == "rules" else "external"
    candidate = SummaryCandidate.from_selection(example, system or f"decontext-{backend_tag}", selected)
    target = should_decontextualize(example, selected)
    if target is None:
        return candidate, None
    req = DecontextRequest(title_for(example), example.answer_sentences, target)
    result = None
    if backend != "rules":
        try:
            raw = backend.complete(serialize_request(req), tag=example.id)
            result = parse_response(raw, req.target)
        except (EndpointError, DataError) as exc:
            logger.warning("decontextualizer endpoint failed for %s, using rules: %s", example.id, exc)
    if result is None:
        try:
            result = rule_based_decontext(req)
        except Exception as exc:  # degradation contract: never propagate
            logger.warning("rule-based decontextualization failed for %s: %s", example.id, exc)
            result = DecontextResult.make(Category.UNNECESSARY, req.target)
    if result.category is Category.DONE:
        rest = [example.answer_sentences[i] for i in sorted(selected) if i != target]
        candidate = candidate.with_text(" ".join([result.text] + rest))
    return candidate, result


def edit_stats(results: Sequence[DecontextResult]) -> EditStats:
    """Category distribution plus mean relative token-length increase of
    the edited sentences."""
    n = len(results)
    if n == 0:
        return EditStats(0, 0.0, 0.0, 0.0, None)
    counts = {cat: 0 for cat in Category}
    for r in results:
        counts[r.category] += 1
    increases = []
    for r in results:
        if r.category is Category.DONE:
            original_len = len(tokenize(r.original))
            if original_len:
                increases.append(100.0 * (len(tokenize(r.text)) - original_len) / original_len)
    return EditStats(
        count=n,
        pct_unnecessary=100.0 * counts[Category.UNNECESSARY] / n,
        pct_infeasible=100.0 * counts[Category.INFEASIBLE] / n,
        pct_done=100.0 * counts[Category.DONE] / n,
        mean_length_increase_pct=sum(increases) / len(increases) if increases else None,
    )
