"""Extractive summarizers: LEAD baselines, a tunable question-overlap
scorer, and encode/decode plumbing for external sequence-labeling models.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace

from .corpus import Corpus, QAExample
from .errors import DataError, MalformedResponseError
from .metrics import best_ref_classification
from .textproc import tokenize, unigram_overlap

logger = logging.getLogger(__name__)

POSITIVE_LABELS = frozenset({"summary", "1", "yes"})


@dataclass(frozen=True)
class SummaryCandidate:
    """One system's summary for one example: selected sentence indices
    and/or rendered summary text."""

    example_id: str
    system: str
    selected: frozenset[int]
    summary_text: str | None = None

    @classmethod
    def from_selection(cls, example: QAExample, system: str, selected: set[int] | frozenset[int]) -> "SummaryCandidate":
        selected = frozenset(selected)
        bad = [i for i in selected if not 0 <= i < example.n_sentences]
        if bad:
            raise DataError(f"example {example.id!r}: selected indices {sorted(bad)} out of range (n={example.n_sentences})")
        return cls(
            example_id=example.id,
            system=system,
            selected=selected,
            summary_text=example.annotation_text(selected) if selected else None,
        )

    def with_text(self, text: str) -> "SummaryCandidate":
        return replace(self, summary_text=text)


@dataclass(frozen=True)
class ScorerConfig:
    """Weights for the heuristic sentence scorer plus the selection
    threshold."""

    overlap_weight: float = 1.0
    position_weight: float = 0.5
    length_weight: float = 0.25
    threshold: float = 0.6


def lead_k(example: QAExample, k: int, system: str | None = None) -> SummaryCandidate:
    """Select the first min(k, n) sentences."""
    if k < 1:
        raise ValueError("k must be >= 1")
    selected = frozenset(range(min(k, example.n_sentences)))
    return SummaryCandidate.from_selection(example, system or f"lead{k}", selected)


def score_sentences(example: QAExample, config: ScorerConfig) -> list[float]:
    """Heuristic relevance score per sentence: question overlap, position
    prior, and a length prior saturating at 30 tokens."""
    scores = []
    for i, sent in enumerate(example.answer_sentences):
        score = (
            config.overlap_weight * unigram_overlap(sent, example.question)
            + config.position_weight * (1.0 / (1 + i))
            + config.length_weight * min(1.0, len(tokenize(sent)) / 30.0)
        )
        scores.append(score)
    return scores


def select_by_threshold(scores: list[float], threshold: float) -> frozenset[int]:
    """Indices scoring at or above the threshold; falls back to the argmax
    (lowest index on ties) so the selection is never empty."""
    if not scores:
        raise ValueError("scores must be non-empty")
    chosen = frozenset(i for i, s in enumerate(scores) if s >= threshold)
    if chosen:
        return chosen
    return frozenset({max(range(len(scores)), key=lambda i: (scores[i], -i))})


def tune_threshold(val: Corpus, config: ScorerConfig) -> float:
    """Sweep candidate thresholds over all observed scores (plus +-inf
    sentinels) and return the one maximizing mean best-reference F1 on the
    validation corpus; lowest threshold wins ties."""
    if not len(val):
        raise DataError("cannot tune on an empty corpus")
    per_example = [(ex, score_sentences(ex, config)) for ex in val]
    candidates = sorted({s for _, scores in per_example for s in scores})
    candidates = [float("-inf")] + candidates + [float("inf")]
    best_theta, best_f1 = None, -1.0
    for theta in candidates:
        total = 0.0
        for ex, scores in per_example:
            pred = select_by_threshold(scores, theta)
            total += best_ref_classification(pred, ex.summary_annotations).f1
        mean_f1 = total / len(val)
        if mean_f1 > best_f1:
            best_theta, best_f1 = theta, mean_f1
    return best_theta


def overlap_extract(example: QAExample, config: ScorerConfig, system: str = "overlap") -> SummaryCandidate:
    selected = select_by_threshold(score_sentences(example, config), config.threshold)
    return SummaryCandidate.from_selection(example, system, selected)


def encode_labeling_input(example: QAExample, include_question: bool = True) -> str:
    """Render the labeling input: optional question, then each sentence
    prefixed by its bracketed 1-based marker."""
    parts = []
    if include_question:
        parts.append(example.question)
    for i, sent in enumerate(example.answer_sentences, start=1):
        parts.append(f"[{i}] {sent}")
    return " ".join(parts)


def encode_labeling_output(selected: set[int] | frozenset[int], n: int) -> str:
    """Canonical rendering of a label set, inverse of decode."""
    labels = ["summary" if i in selected else "other" for i in range(n)]
    return " ".join(f"[{i + 1}] {label}" for i, label in enumerate(labels))


@dataclass(frozen=True)
class LabelDecode:
    selected: frozenset[int]
    ignored_markers: int


_MARKER = re.compile(r"\[(\d+)\]([^\[]*)")


def decode_labeling_output(text: str, n: int) -> LabelDecode:
    """Parse "[i] label" pairs back into an index set.

    Labels matching the positive class (case-insensitive summary/1/yes)
    select sentence i-1. Markers outside [1, n] are counted and ignored;
    missing markers default to negative. Raises when no marker parses.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    matches = _MARKER.findall(text)
    if not matches:
        raise MalformedResponseError("no [i] markers found in labeler output", raw=text)
    selected = set()
    ignored = 0
    for marker, label in matches:
        i = int(marker)
        if not 1 <= i <= n:
            ignored += 1
            continue
        if label.strip().lower() in POSITIVE_LABELS:
            selected.add(i - 1)
    if ignored:
        logger.warning("decode_labeling_output: ignored %d out-of-range markers", ignored)
    return LabelDecode(frozenset(selected), ignored)


def write_candidates(path, candidates) -> None:
    """One candidate per JSON line, sorted by example id for stable
    output."""
    import json
    from pathlib import Path

    with Path(path).open("w", encoding="utf-8") as fh:
        for cand in sorted(candidates, key=lambda c: c.example_id):
            record = {
                "example_id": cand.example_id,
                "system": cand.system,
                "selected": sorted(cand.selected) if cand.selected else None,
                "summary_text": cand.summary_text,
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def load_candidates(path, corpus: Corpus | None = None) -> list[SummaryCandidate]:
    """Read a candidates file; when a corpus is supplied, validates the
    example ids and selections and rehydrates missing summary text."""
    import json
    from pathlib import Path

    by_id = corpus.by_id() if corpus is not None else {}
    candidates = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: invalid JSON on line {line_no}: {exc}") from exc
            selected = frozenset(obj.get("selected") or [])
            text = obj.get("summary_text")
            example = by_id.get(obj["example_id"])
            if example is not None and selected:
                cand = SummaryCandidate.from_selection(example, obj["system"], selected)
                if text is not None:
                    cand = cand.with_text(text)
            else:
                cand = SummaryCandidate(obj["example_id"], obj["system"], selected, text)
            candidates.append(cand)
    return candidates


def external_extract(example: QAExample, client, include_question: bool = True, system: str = "external-extract") -> SummaryCandidate:
    """Encode, call the completion endpoint, decode; an all-negative
    labeling falls back to LEAD-1."""
    encoded = encode_labeling_input(example, include_question=include_question)
    output = client.complete(encoded, tag=example.id)
    decoded = decode_labeling_output(output, example.n_sentences)
    selected = decoded.selected or frozenset({0})
    return SummaryCandidate.from_selection(example, system, selected)
