"""Two-stage human evaluation study: items, annotation records, task
assignment with an append-only log, agreement statistics, aggregation,
and significance tests.

Annotators first judge the summary alone (fluency, adequacy), then see
the long answer and judge faithfulness and long-answer adequacy. Each
(example, variant) cell collects a fixed number of distinct annotators,
and no annotator ever sees two variants of the same example.
"""

from __future__ import annotations

import json
import math
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from scipy import stats as scipy_stats

from .errors import DataError

class UnknownAssignmentError(DataError):
    pass


class SubmissionOrderError(DataError):
    """Stage submitted out of order or twice; the original record wins."""


YES = "Yes"
PARTIALLY = "Partially"
NO = "No"
BINARY = (YES, NO)
TERNARY = (YES, PARTIALLY, NO)

# Question name -> label space. Stage 1 asks the first two, stage 2 the rest.
QUESTIONS: dict[str, tuple[str, ...]] = {
    "fluency": BINARY,
    "adequacy": TERNARY,
    "faithfulness": BINARY,
    "long_adequacy": TERNARY,
}
STAGE1_QUESTIONS = ("fluency", "adequacy")
STAGE2_QUESTIONS = ("faithfulness", "long_adequacy")


def _check_label(question: str, label: str) -> str:
    if label not in QUESTIONS[question]:
        raise DataError(f"invalid {question} label {label!r}; expected one of {QUESTIONS[question]}")
    return label


def adequacy_score(label: str) -> float:
    """Yes/Partially/No -> 1.0/0.5/0.0."""
    mapping = {YES: 1.0, PARTIALLY: 0.5, NO: 0.0}
    if label not in mapping:
        raise DataError(f"unknown adequacy label {label!r}")
    return mapping[label]


@dataclass(frozen=True)
class StudyItem:
    example_id: str
    question: str
    long_answer: str
    variants: dict[str, str]

    def __post_init__(self):
        if not self.variants:
            raise DataError(f"item {self.example_id!r} has no summary variants")
        for tag, text in self.variants.items():
            if not text.strip():
                raise DataError(f"item {self.example_id!r} variant {tag!r} has empty text")


@dataclass
class AnnotationRecord:
    """One annotator's judgments for one (example, variant) cell. Stage-2
    fields stay None until that stage is submitted."""

    annotator_id: str
    example_id: str
    variant: str
    fluency: str | None = None
    adequacy: str | None = None
    faithfulness: str | None = None
    long_adequacy: str | None = None
    stage1_ts: float | None = None
    stage2_ts: float | None = None

    @property
    def stage1_complete(self) -> bool:
        return self.fluency is not None

    @property
    def complete(self) -> bool:
        return self.faithfulness is not None

    def answer(self, question: str) -> str | None:
        return getattr(self, question)


def load_annotation_records(path: str | Path) -> list[AnnotationRecord]:
    """Read flat JSONL annotation records (one complete judgment per
    line) for offline aggregation."""
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: invalid JSON on line {line_no}: {exc}") from exc
            try:
                records.append(
                    AnnotationRecord(
                        annotator_id=str(obj["annotator_id"]),
                        example_id=str(obj["example_id"]),
                        variant=str(obj["variant"]),
                        fluency=_check_label("fluency", obj["fluency"]),
                        adequacy=_check_label("adequacy", obj["adequacy"]),
                        faithfulness=_check_label("faithfulness", obj["faithfulness"]),
                        long_adequacy=_check_label("long_adequacy", obj["long_adequacy"]),
                    )
                )
            except KeyError as exc:
                raise DataError(f"{path}: line {line_no} missing field {exc}") from exc
    return records


# ---------------------------------------------------------------------------
# Agreement and significance statistics


def fleiss_kappa(counts: Sequence[Sequence[int]], raters_per_item: int) -> float | None:
    """Chance-corrected agreement for fixed-count multi-rater labels.

    counts is an items x categories matrix of label tallies; every row
    must sum to raters_per_item. Returns None when expected agreement is
    1 (all mass in one category), where kappa is undefined.
    """
    n = raters_per_item
    if n < 2:
        raise DataError("fleiss_kappa requires at least 2 raters per item")
    if not counts:
        raise DataError("fleiss_kappa requires at least one item")
    n_items = len(counts)
    n_categories = len(counts[0])
    for i, row in enumerate(counts):
        if len(row) != n_categories:
            raise DataError(f"row {i} has {len(row)} categories, expected {n_categories}")
        if sum(row) != n:
            raise DataError(f"row {i} sums to {sum(row)}, expected {n} raters")
    p_bar = sum((sum(v * v for v in row) - n) / (n * (n - 1)) for row in counts) / n_items
    totals = [sum(row[j] for row in counts) for j in range(n_categories)]
    p_e = sum((t / (n_items * n)) ** 2 for t in totals)
    if abs(1.0 - p_e) < 1e-12:
        return None
    return (p_bar - p_e) / (1.0 - p_e)


@dataclass(frozen=True)
class TTestResult:
    t: float | None
    p: float | None
    degenerate: str | None = None


def paired_t_test(scores_a: Sequence[float], scores_b: Sequence[float]) -> TTestResult:
    """Two-sided paired t-test. Zero-variance difference vectors yield a
    degenerate marker instead of a statistic."""
    if len(scores_a) != len(scores_b):
        raise DataError("paired t-test requires equal-length score vectors")
    if len(scores_a) < 2:
        raise DataError("paired t-test requires at least 2 pairs")
    diffs = [a - b for a, b in zip(scores_a, scores_b)]
    mean = sum(diffs) / len(diffs)
    var = sum((d - mean) ** 2 for d in diffs) / (len(diffs) - 1)
    if var == 0.0:
        return TTestResult(None, None, "no difference" if mean == 0.0 else "zero variance")
    t = mean / math.sqrt(var / len(diffs))
    p = 2.0 * float(scipy_stats.t.sf(abs(t), df=len(diffs) - 1))
    return TTestResult(t, p)


def mcnemar(b: int, c: int) -> float:
    """Exact two-sided McNemar p-value from the discordant-pair counts,
    via a binomial test at rate 0.5."""
    if b < 0 or c < 0:
        raise DataError("discordant counts must be non-negative")
    n = b + c
    if n == 0:
        return 1.0
    k = min(b, c)
    tail = sum(math.comb(n, i) for i in range(k + 1)) / 2.0**n
    return min(1.0, 2.0 * tail)


# ---------------------------------------------------------------------------
# Aggregation


@dataclass
class VariantReport:
    n: int
    fluency_yes_pct: float
    adequacy: dict[str, float]
    faithfulness_yes_pct: float
    long_adequacy: dict[str, float]
    functional_pct: float


@dataclass
class StudyReport:
    mode: str
    variants: dict[str, VariantReport]
    kappa: dict[str, float | None]
    coverage_pct: float | None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "variants": {
                tag: {
                    "n": v.n,
                    "fluency_yes_pct": v.fluency_yes_pct,
                    "adequacy": v.adequacy,
                    "faithfulness_yes_pct": v.faithfulness_yes_pct,
                    "long_adequacy": v.long_adequacy,
                    "functional_pct": v.functional_pct,
                }
                for tag, v in self.variants.items()
            },
            "kappa": self.kappa,
            "coverage_pct": self.coverage_pct,
        }


def _majority(labels: Sequence[str], space: tuple[str, ...]) -> str:
    """Majority label; three-way ties resolve to Partially (the
    midpoint), two-way ties conservatively to No."""
    counts = {label: 0 for label in space}
    for label in labels:
        counts[label] += 1
    best = max(counts.values())
    winners = [label for label, c in counts.items() if c == best]
    if len(winners) == 1:
        return winners[0]
    return PARTIALLY if PARTIALLY in space else NO

def _cells(records: Iterable[AnnotationRecord]) -> dict[tuple[str, str], list[AnnotationRecord]]:
    cells: dict[tuple[str, str], list[AnnotationRecord]] = {}
    for rec in records:
        cells.setdefault((rec.example_id, rec.variant), []).append(rec)
    return cells


def _cell_functional(cell_records: Sequence[AnnotationRecord]) -> bool:
    return (
        _majority([r.fluency for r in cell_records], BINARY) == YES
        and _majority([r.adequacy for r in cell_records], TERNARY) == YES
        and _majority([r.faithfulness for r in cell_records], BINARY) == YES
    )


def _question_kappa(cells: dict[tuple[str, str], list[AnnotationRecord]], annotators_per_cell: int) -> dict[str, float | None]:
    kappa: dict[str, float | None] = {}
    for question, space in QUESTIONS.items():
        matrix = []
        for cell_records in cells.values():
            if len(cell_records) != annotators_per_cell:
                continue
            row = [sum(1 for r in cell_records if r.answer(question) == label) for label in space]
            matrix.append(row)
        kappa[question] = fleiss_kappa(matrix, annotators_per_cell) if matrix else None
    return kappa


def aggregate_report(
    records: Sequence[AnnotationRecord],
    annotators_per_cell: int = 3,
    mode: str = "per-response",
    partial: bool = False,
) -> StudyReport:
    """Fold annotation records into per-variant percentages.

    per-response mode reports the share of individual judgments per
    category; majority mode first reduces each cell to its majority label.
    Functional means fluent, adequate (Yes), and faithful at once, under
    the same mode. Kappa is always computed over full cells.
    """
    if mode not in ("per-response", "majority"):
        raise DataError(f"unknown aggregation mode {mode!r}")
    complete = [r for r in records if r.complete]
    if not partial:
        if len(complete) != len(records):
            raise DataError("study has records without stage-2 answers; pass partial to aggregate anyway")
        bad = [key for key, cell in _cells(records).items() if len(cell) != annotators_per_cell]
        if bad:
            raise DataError(f"{len(bad)} cells are not fully annotated; pass partial to aggregate anyway")
    if not complete:
        raise DataError("no complete annotation records to aggregate")

    cells = _cells(complete)
    variants = sorted({rec.variant for rec in complete})
    variant_reports: dict[str, VariantReport] = {}
    for variant in variants:
        if mode == "per-response":
            recs = [r for r in complete if r.variant == variant]
            n = len(recs)
            pct = lambda q, label: 100.0 * sum(1 for r in recs if r.answer(q) == label) / n
            functional = 100.0 * sum(
                1 for r in recs if r.fluency == YES and r.adequacy == YES and r.faithfulness == YES
            ) / n
        else:
            cell_items = [cell for key, cell in sorted(cells.items()) if key[1] == variant]
            n = len(cell_items)
            labels = {
                q: [_majority([r.answer(q) for r in cell], QUESTIONS[q]) for cell in cell_items]
                for q in QUESTIONS
            }
            pct = lambda q, label: 100.0 * sum(1 for lab in labels[q] if lab == label) / n
            functional = 100.0 * sum(1 for cell in cell_items if _cell_functional(cell)) / n
        variant_reports[variant] = VariantReport(
            n=n,
            fluency_yes_pct=pct("fluency", YES),
            adequacy={label: pct("adequacy", label) for label in TERNARY},
            faithfulness_yes_pct=pct("faithfulness", YES),
            long_adequacy={label: pct("long_adequacy", label) for label in TERNARY},
            functional_pct=functional,
        )

    return StudyReport(
        mode=mode,
        variants=variant_reports,
        kappa=_question_kappa(cells, annotators_per_cell),
        coverage_pct=coverage_analysis(complete),
    )


def coverage_analysis(records: Sequence[AnnotationRecord]) -> float | None:
    """Among examples whose long answer is majority-adequate (pooled over
    variants), the percentage with at least one functional variant."""
    complete = [r for r in records if r.complete]
    if not complete:
        return None
    cells = _cells(complete)
    by_example: dict[str, list[AnnotationRecord]] = {}
    for rec in complete:
        by_example.setdefault(rec.example_id, []).append(rec)
    adequate = [
        ex for ex, recs in by_example.items()
        if _majority([r.long_adequacy for r in recs], TERNARY) == YES
    ]
    if not adequate:
        return 0.0
    covered = 0
    for ex in adequate:
        if any(_cell_functional(cell) for (cell_ex, _), cell in cells.items() if cell_ex == ex):
            covered += 1
    return 100.0 * covered / len(adequate)


# ---------------------------------------------------------------------------
# Persistent study store


@dataclass
class Assignment:
    assignment_id: str
    annotator_id: str
    example_id: str
    variant: str


class StudyStore:
    """Append-only annotation study state.

    Every mutation appends one JSON line to the log and updates in-memory
    state under a single lock, so assignment and submission interleavings
    are linearizable and the study can be rebuilt by replay.
    """

    def __init__(self, log_path: str | Path | None = None):
        self._lock = threading.Lock()
        self._log_path = Path(log_path) if log_path else None
        self.items: dict[str, StudyItem] = {}
        self.annotators_per_cell = 0
        self._cell_assignments: dict[tuple[str, str], list[str]] = {}
        self._assignments: dict[str, Assignment] = {}
        self._records: dict[str, AnnotationRecord] = {}
        self._annotator_examples: dict[str, set[str]] = {}
        self.selections: list[dict] = []
        if self._log_path and self._log_path.exists():
            self._replay()

    # -- persistence

    def _append(self, event: dict) -> None:
        if self._log_path is None:
            return
        with self._log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")
            fh.flush()

    def _replay(self) -> None:
        with self._log_path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{self._log_path}: corrupt log line {line_no}: {exc}") from exc
                self._apply(event)

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "study":
            items = [
                StudyItem(
                    example_id=obj["example_id"],
                    question=obj["question"],
                    long_answer=obj["long_answer"],
                    variants=obj["variants"],
                )
                for obj in event["items"]
            ]
            self._init_study(items, event["annotators_per_cell"])
        elif kind == "assign":
            assignment = Assignment(
                event["assignment_id"], event["annotator_id"], event["example_id"], event["variant"]
            )
            self._register_assignment(assignment)
        elif kind == "stage1":
            rec = self._records[event["assignment_id"]]
            rec.fluency = event["fluency"]
            rec.adequacy = event["adequacy"]
            rec.stage1_ts = event["ts"]
        elif kind == "stage2":
            rec = self._records[event["assignment_id"]]
            rec.faithfulness = event["faithfulness"]
            rec.long_adequacy = event["long_adequacy"]
            rec.stage2_ts = event["ts"]
        elif kind == "selection":
            self.selections.append(
                {k: event[k] for k in ("annotator_id", "example_id", "selected", "ts")}
            )
        else:
            raise DataError(f"unknown log event {kind!r}")

    # -- study lifecycle

    def _init_study(self, items: Sequence[StudyItem], annotators_per_cell: int) -> None:
        seen = set()
        for item in items:
            if item.example_id in seen:
                raise DataError(f"duplicate study item {item.example_id!r}")
            seen.add(item.example_id)
        self.items = {item.example_id: item for item in items}
        self.annotators_per_cell = annotators_per_cell
        self._cell_assignments = {
            (item.example_id, variant): []
            for item in items
            for variant in sorted(item.variants)
        }

    def create_study(self, items: Sequence[StudyItem], annotators_per_cell: int = 3) -> None:
        if not items:
            raise DataError("cannot create a study without items")
        if annotators_per_cell < 1:
            raise DataError("annotators_per_cell must be >= 1")
        if self.items:
            raise DataError("store already holds a study")
        with self._lock:
            self._init_study(items, annotators_per_cell)
            self._append(
                {
                    "event": "study",
                    "annotators_per_cell": annotators_per_cell,
                    "items": [
                        {
                            "example_id": item.example_id,
                            "question": item.question,
                            "long_answer": item.long_answer,
                            "variants": item.variants,
                        }
                        for item in items
                    ],
                }
            )

    @property
    def required_annotations(self) -> int:
        return len(self._cell_assignments) * self.annotators_per_cell

    def _register_assignment(self, assignment: Assignment) -> None:
        self._assignments[assignment.assignment_id] = assignment
        self._cell_assignments[(assignment.example_id, assignment.variant)].append(assignment.assignment_id)
        self._annotator_examples.setdefault(assignment.annotator_id, set()).add(assignment.example_id)
        self._records[assignment.assignment_id] = AnnotationRecord(
            annotator_id=assignment.annotator_id,
            example_id=assignment.example_id,
            variant=assignment.variant,
        )

    # -- assignment and submission

    def assign_task(self, annotator_id: str) -> Assignment | None:
        """Hand the annotator an open cell for an example they have never
        seen; atomic, returns None when nothing is eligible."""
        if not annotator_id:
            raise DataError("annotator id must be non-empty")
        with self._lock:
            taken = self._annotator_examples.get(annotator_id, set())
            for (example_id, variant), assigned in self._cell_assignments.items():
                if len(assigned) >= self.annotators_per_cell:
                    continue
                if example_id in taken:
                    continue
                assignment = Assignment(uuid.uuid4().hex, annotator_id, example_id, variant)
                self._register_assignment(assignment)
                self._append(
                    {
                        "event": "assign",
                        "assignment_id": assignment.assignment_id,
                        "annotator_id": annotator_id,
                        "example_id": example_id,
                        "variant": variant,
                        "ts": time.time(),
                    }
                )
                return assignment
            return None

    def _get_record(self, assignment_id: str) -> AnnotationRecord:
        rec = self._records.get(assignment_id)
        if rec is None:
            raise UnknownAssignmentError(f"unknown assignment {assignment_id!r}")
        return rec

    def submit_stage1(self, assignment_id: str, fluency: str, adequacy: str) -> StudyItem:
        """Record the summary-only judgments; returns the item so the
        caller can reveal the long answer."""
        _check_label("fluency", fluency)
        _check_label("adequacy", adequacy)
        with self._lock:
            rec = self._get_record(assignment_id)
            if rec.stage1_complete:
                raise SubmissionOrderError(f"stage 1 already submitted for assignment {assignment_id!r}")
            ts = time.time()
            rec.fluency = fluency
            rec.adequacy = adequacy
            rec.stage1_ts = ts
            self._append(
                {"event": "stage1", "assignment_id": assignment_id, "fluency": fluency, "adequacy": adequacy, "ts": ts}
            )
            return self.items[rec.example_id]

    def submit_stage2(self, assignment_id: str, faithfulness: str, long_adequacy: str) -> None:
        _check_label("faithfulness", faithfulness)
        _check_label("long_adequacy", long_adequacy)
        with self._lock:
            rec = self._get_record(assignment_id)
            if not rec.stage1_complete:
                raise SubmissionOrderError(f"stage 2 submitted before stage 1 for assignment {assignment_id!r}")
            if rec.complete:
                raise SubmissionOrderError(f"stage 2 already submitted for assignment {assignment_id!r}")
            ts = time.time()
            rec.faithfulness = faithfulness
            rec.long_adequacy = long_adequacy
            rec.stage2_ts = ts
            self._append(
                {
                    "event": "stage2",
                    "assignment_id": assignment_id,
                    "faithfulness": faithfulness,
                    "long_adequacy": long_adequacy,
                    "ts": ts,
                }
            )

    # -- sentence-selection annotation (corpus collection support)

    def submit_selection(self, annotator_id: str, example_id: str, selected: Iterable[int], n_sentences: int | None = None) -> None:
        selected = sorted(set(int(i) for i in selected))
        if not selected:
            raise DataError("selection must contain at least one sentence index")
        if n_sentences is not None:
            bad = [i for i in selected if not 0 <= i < n_sentences]
            if bad:
                raise DataError(f"selection indices {bad} out of range (n={n_sentences})")
        with self._lock:
            event = {
                "event": "selection",
                "annotator_id": annotator_id,
                "example_id": example_id,
                "selected": selected,
                "ts": time.time(),
            }
            self.selections.append({k: event[k] for k in ("annotator_id", "example_id", "selected", "ts")})
            self._append(event)

    # -- views

    def assignment(self, assignment_id: str) -> Assignment | None:
        return self._assignments.get(assignment_id)

    def records(self) -> list[AnnotationRecord]:
        return list(self._records.values())

    def report(self, mode: str = "per-response", partial: bool = False) -> StudyReport:
        return aggregate_report(self.records(), self.annotators_per_cell, mode=mode, partial=partial)

    def export_records(self) -> list[dict]:
        """Flat dump of all annotation records plus selection events."""
        out = []
        for assignment_id, rec in self._records.items():
            out.append(
                {
                    "assignment_id": assignment_id,
                    "annotator_id": rec.annotator_id,
                    "example_id": rec.example_id,
                    "variant": rec.variant,
                    "fluency": rec.fluency,
                    "adequacy": rec.adequacy,
                    "faithfulness": rec.faithfulness,
                    "long_adequacy": rec.long_adequacy,
                    "stage1_ts": rec.stage1_ts,
                    "stage2_ts": rec.stage2_ts,
                }
            )
        for sel in self.selections:
            out.append({"record": "selection", **sel})
        return out
