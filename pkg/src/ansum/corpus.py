"""Load, validate, split, and summarize the long-form-answer corpus.

The corpus file is UTF-8 JSON lines, one record per line with fields:
``id`` (string), ``dataset`` ("eli5"|"nq"|"webgpt"), ``question`` (string),
``title`` (string or null), ``answer_sentences`` (array of strings),
``summary_annotations`` (array of exactly 3 arrays of 0-based indices).
"""

from __future__ import annotations

import json
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CorpusValidationError, DataError
from .textproc import tokenize

DATASETS = ("eli5", "nq", "webgpt")
MIN_SENTENCES = 3
MAX_SENTENCES = 15
N_ANNOTATIONS = 3


@dataclass(frozen=True)
class QAExample:
    """One question with a sentence-segmented long-form answer and three
    reference summary annotations (sets of answer-sentence indices)."""

    id: str
    dataset: str
    question: str
    title: str | None
    answer_sentences: tuple[str, ...]
    summary_annotations: tuple[frozenset[int], ...]

    def __post_init__(self):
        if self.dataset not in DATASETS:
            self._fail("dataset", f"unknown dataset {self.dataset!r}")
        n = len(self.answer_sentences)
        if not MIN_SENTENCES <= n <= MAX_SENTENCES:
            self._fail("answer_sentences", f"answer has {n} sentences, expected {MIN_SENTENCES}..{MAX_SENTENCES}")
        for i, sent in enumerate(self.answer_sentences):
            if not sent.strip():
                self._fail("answer_sentences", f"sentence {i} is empty")
        if len(self.summary_annotations) != N_ANNOTATIONS:
            self._fail("summary_annotations", f"expected {N_ANNOTATIONS} annotations, got {len(self.summary_annotations)}")
        for j, ann in enumerate(self.summary_annotations):
            if not ann:
                self._fail("summary_annotations", f"annotation {j} is empty")
            bad = [i for i in ann if not 0 <= i < n]
            if bad:
                self._fail("summary_annotations", f"annotation {j} has out-of-range indices {sorted(bad)} (n={n})")

    def _fail(self, fieldname: str, why: str):
        raise CorpusValidationError(f"example {self.id!r}: {why}", example_id=self.id, field=fieldname)

    @property
    def n_sentences(self) -> int:
        return len(self.answer_sentences)

    def annotation_text(self, annotation: frozenset[int] | set[int]) -> str:
        """Render an index set as text: selected sentences in answer order."""
        return " ".join(self.answer_sentences[i] for i in sorted(annotation))


@dataclass(frozen=True)
class Corpus:
    examples: tuple[QAExample, ...]
    provenance: str = ""

    def __post_init__(self):
        seen = set()
        for ex in self.examples:
            if ex.id in seen:
                raise CorpusValidationError(f"duplicate example id {ex.id!r}", example_id=ex.id, field="id")
            seen.add(ex.id)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def by_id(self) -> dict[str, QAExample]:
        return {ex.id: ex for ex in self.examples}

    def subset(self, dataset: str) -> "Corpus":
        return Corpus(
            tuple(ex for ex in self.examples if ex.dataset == dataset),
            provenance=f"{self.provenance}[{dataset}]",
        )


@dataclass
class DatasetStats:
    count: int
    mean_question_tokens: float
    mean_answer_tokens: float
    mean_answer_sentences: float
    mean_summary_tokens: float
    mean_summary_sentences: float
    mean_compression: float


@dataclass
class StatsReport:
    overall: DatasetStats
    per_dataset: dict[str, DatasetStats] = field(default_factory=dict)
    compression_quartiles: dict[str, tuple[float, float, float, float, float]] = field(default_factory=dict)


def _parse_record(obj: dict, line_no: int) -> QAExample:
    required = ["id", "dataset", "question", "title", "answer_sentences", "summary_annotations"]
    missing = [k for k in required if k not in obj]
    if missing:
        raise CorpusValidationError(f"line {line_no}: missing fields {missing}", field=",".join(missing))
    anns = obj["summary_annotations"]
    if not isinstance(anns, list):
        raise CorpusValidationError(
            f"line {line_no}: summary_annotations must be a list", example_id=str(obj.get("id")), field="summary_annotations"
        )
    return QAExample(
        id=str(obj["id"]),
        dataset=obj["dataset"],
        question=obj["question"],
        title=obj["title"],
        answer_sentences=tuple(obj["answer_sentences"]),
        summary_annotations=tuple(frozenset(a) for a in anns),
    )


def load_corpus(path: str | Path) -> Corpus:
    """Read and validate a JSONL corpus file.

    Raises DataError with the offending line number on parse failures and
    CorpusValidationError naming the example and field on invariant
    violations. An empty file yields an empty corpus.
    """
    path = Path(path)
    examples = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: invalid JSON on line {line_no}: {exc}") from exc
            examples.append(_parse_record(obj, line_no))
    return Corpus(tuple(examples), provenance=str(path))


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back to JSONL; load(save(c)) round-trips."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for ex in corpus:
            record = {
                "id": ex.id,
                "dataset": ex.dataset,
                "question": ex.question,
                "title": ex.title,
                "answer_sentences": list(ex.answer_sentences),
                "summary_annotations": [sorted(a) for a in ex.summary_annotations],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def split_corpus(
    corpus: Corpus, seed: int, ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
) -> tuple[Corpus, Corpus, Corpus]:
    """Shuffle under seed and partition into train/validation/test.

    Validation and test sizes are floor(ratio * N); leftover rows go to
    train. The same (seed, corpus) always yields the same split.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"split ratios must sum to 1, got {ratios}")
    n = len(corpus)
    n_val = int(ratios[1] * n)
    n_test = int(ratios[2] * n)
    n_train = n - n_val - n_test
    order = list(corpus.examples)
    random.Random(seed).shuffle(order)
    make = lambda rows, tag: Corpus(tuple(rows), provenance=f"{corpus.provenance}[{tag}]")
    return (
        make(order[:n_train], "train"),
        make(order[n_train : n_train + n_val], "val"),
        make(order[n_train + n_val :], "test"),
    )


def sample_annotations(corpus: Corpus, seed: int) -> dict[str, frozenset[int]]:
    """Pick one of the three annotations per example, deterministically.

    Draws follow corpus order so any consumer sharing (corpus, seed) sees
    the same choice per example.
    """
    rng = random.Random(seed)
    return {ex.id: ex.summary_annotations[rng.randrange(N_ANNOTATIONS)] for ex in corpus}


def _compression_ratios(corpus: Corpus, chosen: dict[str, frozenset[int]]) -> dict[str, float]:
    ratios = {}
    for ex in corpus:
        answer_tokens = sum(len(tokenize(s)) for s in ex.answer_sentences)
        summary_tokens = sum(len(tokenize(ex.answer_sentences[i])) for i in chosen[ex.id])
        ratios[ex.id] = summary_tokens / answer_tokens if answer_tokens else 0.0
    return ratios


def _stats_for(examples: list[QAExample], chosen: dict[str, frozenset[int]], ratios: dict[str, float]) -> DatasetStats:
    mean = lambda xs: sum(xs) / len(xs)
    return DatasetStats(
        count=len(examples),
        mean_question_tokens=mean([len(tokenize(ex.question)) for ex in examples]),
        mean_answer_tokens=mean([sum(len(tokenize(s)) for s in ex.answer_sentences) for ex in examples]),
        mean_answer_sentences=mean([ex.n_sentences for ex in examples]),
        mean_summary_tokens=mean(
            [sum(len(tokenize(ex.answer_sentences[i])) for i in chosen[ex.id]) for ex in examples]
        ),
        mean_summary_sentences=mean([len(chosen[ex.id]) for ex in examples]),
        mean_compression=mean([ratios[ex.id] for ex in examples]),
    )


def corpus_stats(corpus: Corpus, seed: int = 0) -> StatsReport:
    """Per-dataset and overall token/sentence/compression statistics.

    Summary-side numbers use one annotation sampled per example under
    seed; all aggregates share that draw.
    """
    if not len(corpus):
        raise DataError("cannot compute statistics of an empty corpus")
    chosen = sample_annotations(corpus, seed)
    ratios = _compression_ratios(corpus, chosen)
    report = StatsReport(overall=_stats_for(list(corpus), chosen, ratios))
    for ds in DATASETS:
        exs = [ex for ex in corpus if ex.dataset == ds]
        if exs:
            report.per_dataset[ds] = _stats_for(exs, chosen, ratios)
            report.compression_quartiles[ds] = _quartiles([ratios[ex.id] for ex in exs])
    return report


def _quartiles(values: list[float]) -> tuple[float, float, float, float, float]:
    if len(values) == 1:
        v = values[0]
        return (v, v, v, v, v)
    q1, med, q3 = statistics.quantiles(values, n=4, method="inclusive")
    return (min(values), q1, med, q3, max(values))


def compression_distribution(corpus: Corpus, seed: int = 0) -> dict[str, tuple[float, float, float, float, float]]:
    """min/Q1/median/Q3/max of token-level compression per dataset.

    Uses the same sampled annotation as corpus_stats for the same seed.
    Quartiles use linear interpolation.
    """
    if not len(corpus):
        raise DataError("cannot compute distribution of an empty corpus")
    chosen = sample_annotations(corpus, seed)
    ratios = _compression_ratios(corpus, chosen)
    out = {}
    for ds in DATASETS:
        vals = [ratios[ex.id] for ex in corpus if ex.dataset == ds]
        if vals:
            out[ds] = _quartiles(vals)
    return out
