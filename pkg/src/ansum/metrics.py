"""Automatic evaluation against 3-way-annotated extractive references.

Covers set-level classification metrics (P/R/F1, exact match) with
best-reference selection, ROUGE-L, greedy-matching BERTScore against a
pluggable token-embedding provider, and length statistics. All scoring is
pure; nothing here talks to the network.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .corpus import Corpus, N_ANNOTATIONS
from .errors import DataError
from .textproc import split_sentences, tokenize

if TYPE_CHECKING:
    from .extract import SummaryCandidate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassificationScore:
    precision: float
    recall: float
    f1: float
    exact_match: bool
    chosen_ref: int


@dataclass(frozen=True)
class RougeScore:
    rouge_l_f1: float
    chosen_ref: int
    bert_score_f1: float | None = None


@dataclass
class EvalReport:
    """Per-system means. Classification fields are None for systems that
    produce free text without sentence selections."""

    system: str
    count: int
    precision: float | None
    recall: float | None
    f1: float | None
    em_pct: float | None
    rouge_l: float
    bert_score: float | None
    mean_tokens: float
    mean_sentences: float


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def prf(pred: set[int] | frozenset[int], ref: set[int] | frozenset[int]) -> tuple[float, float, float]:
    """Precision/recall/F1 with summary sentences as the positive class."""
    if not ref:
        raise ValueError("reference set must be non-empty")
    hit = len(set(pred) & set(ref))
    p = hit / len(pred) if pred else 0.0
    r = hit / len(ref)
    return p, r, _f1(p, r)


def exact_match(pred: set[int] | frozenset[int], refs: Sequence[frozenset[int]]) -> bool:
    pred = frozenset(pred)
    return any(pred == frozenset(ref) for ref in refs)


def best_ref_classification(pred: set[int] | frozenset[int], refs: Sequence[frozenset[int]]) -> ClassificationScore:
    """Score against all references and keep the max-F1 one (lowest index
    wins ties)."""
    best = None
    for i, ref in enumerate(refs):
        p, r, f1 = prf(pred, ref)
        if best is None or f1 > best[2]:
            best = (p, r, f1, i)
    p, r, f1, i = best
    return ClassificationScore(p, r, f1, exact_match(pred, refs), i)


def lcs_len(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence (two-row DP)."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l_f1(cand: str, ref: str) -> float:
    """ROUGE-L F1 (beta=1) over whitespace-and-punctuation tokenization."""
    cand_toks = tokenize(cand)
    ref_toks = tokenize(ref)
    if not cand_toks or not ref_toks:
        logger.warning("rouge_l_f1: empty side (cand=%d tokens, ref=%d tokens)", len(cand_toks), len(ref_toks))
        return 0.0
    lcs = lcs_len(cand_toks, ref_toks)
    return _f1(lcs / len(cand_toks), lcs / len(ref_toks))


def rouge_best(cand: str, refs: Sequence[str]) -> RougeScore:
    """Max ROUGE-L F1 over the rendered references; remembers which
    reference won so BERTScore can reuse it."""
    best_score, best_i = -1.0, 0
    for i, ref in enumerate(refs):
        score = rouge_l_f1(cand, ref)
        if score > best_score:
            best_score, best_i = score, i
    return RougeScore(best_score, best_i)


def bert_score_f1(cand: str, ref: str, embedder) -> float:
    """Greedy-matching F1 over token embeddings.

    The embedder maps a token list to one unit-norm vector per token.
    Recall averages, over reference tokens, the max cosine similarity to
    any candidate token; precision is symmetric.
    """
    cand_toks = tokenize(cand)
    ref_toks = tokenize(ref)
    if not cand_toks or not ref_toks:
        logger.warning("bert_score_f1: empty side (cand=%d tokens, ref=%d tokens)", len(cand_toks), len(ref_toks))
        return 0.0
    cand_vecs = np.asarray(embedder.embed(cand_toks), dtype=float)
    ref_vecs = np.asarray(embedder.embed(ref_toks), dtype=float)
    if cand_vecs.shape[0] != len(cand_toks) or ref_vecs.shape[0] != len(ref_toks):
        raise DataError("embedder returned a different number of vectors than tokens")
    if cand_vecs.shape[1] != ref_vecs.shape[1]:
        raise DataError(f"embedding dimension mismatch: {cand_vecs.shape[1]} vs {ref_vecs.shape[1]}")
    sims = cand_vecs @ ref_vecs.T
    precision = float(sims.max(axis=1).mean())
    recall = float(sims.max(axis=0).mean())
    return _f1(precision, recall)


def _candidate_text(cand: "SummaryCandidate", sentences: Sequence[str] | None = None) -> str:
    if cand.summary_text is not None:
        return cand.summary_text
    if sentences is not None and cand.selected:
        return " ".join(sentences[i] for i in sorted(cand.selected))
    return ""


def length_stats(candidates: Iterable["SummaryCandidate"]) -> tuple[float, float]:
    """Mean token and sentence counts over candidate summaries.

    Sentence counts come from the selected set when present, otherwise
    from splitting the summary text.
    """
    tokens, sentences = [], []
    for cand in candidates:
        text = _candidate_text(cand)
        n_tok = len(tokenize(text))
        if n_tok == 0:
            logger.warning("length_stats: empty summary for example %s", cand.example_id)
        tokens.append(n_tok)
        sentences.append(len(cand.selected) if cand.selected else len(split_sentences(text)))
    if not tokens:
        return 0.0, 0.0
    return sum(tokens) / len(tokens), sum(sentences) / len(sentences)


def evaluate_system(corpus: Corpus, candidates: Sequence["SummaryCandidate"], embedder=None) -> EvalReport:
    """Aggregate per-example scores for one system over a corpus.

    Requires exactly one candidate per corpus example; raises DataError
    listing missing or unknown ids otherwise.
    """
    if not len(corpus):
        raise DataError("cannot evaluate on an empty corpus")
    by_example = corpus.by_id()
    by_candidate = {}
    for cand in candidates:
        if cand.example_id in by_candidate:
            raise DataError(f"duplicate candidate for example {cand.example_id!r}")
        by_candidate[cand.example_id] = cand
    missing = sorted(set(by_example) - set(by_candidate))
    unknown = sorted(set(by_candidate) - set(by_example))
    if missing or unknown:
        raise DataError(f"candidate/corpus mismatch: missing ids {missing}, unknown ids {unknown}")

    all_selected = all(c.selected for c in candidates)
    cls_scores: list[ClassificationScore] = []
    rouge_scores: list[float] = []
    bert_scores: list[float] = []
    for ex in corpus:
        cand = by_candidate[ex.id]
        if all_selected:
            cls_scores.append(best_ref_classification(cand.selected, ex.summary_annotations))
        refs = [ex.annotation_text(a) for a in ex.summary_annotations]
        text = _candidate_text(cand, ex.answer_sentences)
        rs = rouge_best(text, refs)
        rouge_scores.append(rs.rouge_l_f1)
        if embedder is not None:
            bert_scores.append(bert_score_f1(text, refs[rs.chosen_ref], embedder))

    mean = lambda xs: sum(xs) / len(xs)
    mean_tokens, mean_sentences = length_stats(candidates)
    system = candidates[0].system if candidates else "unknown"
    return EvalReport(
        system=system,
        count=len(corpus),
        precision=mean([s.precision for s in cls_scores]) if all_selected else None,
        recall=mean([s.recall for s in cls_scores]) if all_selected else None,
        f1=mean([s.f1 for s in cls_scores]) if all_selected else None,
        em_pct=100.0 * mean([float(s.exact_match) for s in cls_scores]) if all_selected else None,
        rouge_l=mean(rouge_scores),
        bert_score=mean(bert_scores) if bert_scores else None,
        mean_tokens=mean_tokens,
        mean_sentences=mean_sentences,
    )


def human_upper_bound(corpus: Corpus, seed: int = 0, embedder=None) -> EvalReport:
    """Treat one sampled annotation per example as the prediction and the
    other two as references.

    Classification keeps the max-F1 reference; ROUGE (and BERTScore, when
    an embedder is given) average pairwise over the two held-out
    annotations.
    """
    if not len(corpus):
        raise DataError("cannot evaluate on an empty corpus")
    rng = random.Random(seed)
    cls_scores: list[ClassificationScore] = []
    rouge_scores: list[float] = []
    bert_scores: list[float] = []
    tokens, sentences = [], []
    for ex in corpus:
        j = rng.randrange(N_ANNOTATIONS)
        pred = ex.summary_annotations[j]
        others = [ex.summary_annotations[k] for k in range(N_ANNOTATIONS) if k != j]
        cls_scores.append(best_ref_classification(pred, others))
        pred_text = ex.annotation_text(pred)
        other_texts = [ex.annotation_text(o) for o in others]
        rouge_scores.append(sum(rouge_l_f1(pred_text, t) for t in other_texts) / len(other_texts))
        if embedder is not None:
            bert_scores.append(sum(bert_score_f1(pred_text, t, embedder) for t in other_texts) / len(other_texts))
        tokens.append(len(tokenize(pred_text)))
        sentences.append(len(pred))
    mean = lambda xs: sum(xs) / len(xs)
    return EvalReport(
        system="human",
        count=len(corpus),
        precision=mean([s.precision for s in cls_scores]),
        recall=mean([s.recall for s in cls_scores]),
        f1=mean([s.f1 for s in cls_scores]),
        em_pct=100.0 * mean([float(s.exact_match) for s in cls_scores]),
        rouge_l=mean(rouge_scores),
        bert_score=mean(bert_scores) if bert_scores else None,
        mean_tokens=mean(tokens),
        mean_sentences=mean(sentences),
    )


REPORT_COLUMNS = ("system", "P", "R", "F1", "EM_pct", "ROUGE_L", "BERTScore", "tokens", "sentences")


def _report_row(report: EvalReport) -> list[str]:
    fmt = lambda x, spec: "" if x is None else format(x, spec)
    return [
        report.system,
        fmt(report.precision, ".4f"),
        fmt(report.recall, ".4f"),
        fmt(report.f1, ".4f"),
        fmt(report.em_pct, ".1f"),
        fmt(report.rouge_l, ".4f"),
        fmt(report.bert_score, ".4f"),
        fmt(report.mean_tokens, ".2f"),
        fmt(report.mean_sentences, ".2f"),
    ]


def render_report_csv(reports: Sequence[EvalReport]) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    lines += [",".join(_report_row(r)) for r in reports]
    return "\n".join(lines) + "\n"


def render_report_text(reports: Sequence[EvalReport]) -> str:
    rows = [list(REPORT_COLUMNS)] + [_report_row(r) for r in reports]
    widths = [max(len(row[i]) for row in rows) for i in range(len(REPORT_COLUMNS))]
    out = []
    for row in rows:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(out) + "\n"
