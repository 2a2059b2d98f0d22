"""Command-line entry point wiring corpus -> systems -> metrics -> reports,
plus study administration.

Exit codes: 0 success, 1 usage error, 2 data error, 3 remote-endpoint
error. Flags override manifest-file values; `MODEL_API_KEY` supplies the
endpoint credential.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import abstractive as abstractive_mod
from . import metrics as metrics_mod
from .clients import CompletionClient, EndpointConfig, GenerationClient, map_bounded
from .corpus import Corpus, corpus_stats, load_corpus, sample_annotations, save_corpus, split_corpus
from .decontext import decontextualize
from .errors import DataError, EndpointError
from .extract import (
    ScorerConfig,
    SummaryCandidate,
    external_extract,
    lead_k,
    load_candidates,
    overlap_extract,
    write_candidates,
)
from .study import StudyStore, aggregate_report, load_annotation_records

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ENDPOINT = 3

OFFLINE_SYSTEMS = ("lead2", "lead3", "overlap", "gold", "decontext:rules")


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    """Resolved run configuration (manifest file merged with flags)."""

    corpus: str
    system: str = ""
    seed: int = 13
    out: str = "out"
    endpoint: str | None = None
    jobs: int = 1
    theta: float | None = None

    @classmethod
    def resolve(cls, args: argparse.Namespace) -> "RunManifest":
        values: dict = {}
        manifest_path = getattr(args, "manifest", None)
        if manifest_path:
            try:
                values.update(json.loads(Path(manifest_path).read_text(encoding="utf-8")))
            except (OSError, json.JSONDecodeError) as exc:
                raise DataError(f"cannot read manifest {manifest_path}: {exc}") from exc
        for key in ("corpus", "system", "seed", "out", "endpoint", "jobs", "theta"):
            flag = getattr(args, key, None)
            if flag is not None:
                values[key] = flag
        if not values.get("corpus"):
            raise UsageError("a corpus path is required (flag or manifest)")
        known = {k: v for k, v in values.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def _needs_endpoint(system: str) -> bool:
    return system == "external-extract" or system == "decontext:external" or system.startswith("abstractive")


def _summarize_one(example, manifest: RunManifest, chosen, client):
    system = manifest.system
    if system == "lead2":
        return lead_k(example, 2)
    if system == "lead3":
        return lead_k(example, 3)
    if system == "overlap":
        config = ScorerConfig()
        if manifest.theta is not None:
            config = ScorerConfig(threshold=manifest.theta)
        return overlap_extract(example, config)
    if system == "gold":
        return SummaryCandidate.from_selection(example, "gold", chosen[example.id])
    if system.startswith("decontext:"):
        backend = "rules" if system == "decontext:rules" else client
        candidate, _ = decontextualize(example, chosen[example.id], backend=backend)
        return candidate
    if system == "external-extract":
        return external_extract(example, client)
    if system.startswith("abstractive"):
        _, _, flags = system.partition(":")
        parts = set(flags.split("+")) if flags else {"q", "a"}
        config = abstractive_mod.AbstractiveConfig(
            length_control="l" in parts, include_question="q" in parts
        )
        gold = chosen[example.id] if config.length_control else None
        return abstractive_mod.summarize_abstractive(example, client, config, selected_gold=gold)
    raise UsageError(f"unknown system spec {system!r}")


def run_summarize(manifest: RunManifest) -> Path:
    """Produce one candidate per corpus example and write them as JSONL."""
    if not manifest.system:
        raise UsageError("summarize requires a system spec")
    if manifest.system not in OFFLINE_SYSTEMS and not _needs_endpoint(manifest.system):
        raise UsageError(f"unknown system spec {manifest.system!r}")
    client = None
    if _needs_endpoint(manifest.system):
        if not manifest.endpoint:
            raise UsageError(f"system {manifest.system!r} requires --endpoint")
        config = EndpointConfig.from_env(manifest.endpoint)
        client = GenerationClient(config) if manifest.system.startswith("abstractive") else CompletionClient(config)
    corpus = load_corpus(manifest.corpus)
    chosen = sample_annotations(corpus, manifest.seed)
    candidates = map_bounded(
        lambda ex: _summarize_one(ex, manifest, chosen, client), corpus, jobs=manifest.jobs
    )
    out_dir = Path(manifest.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"candidates-{manifest.system.replace(':', '-')}.jsonl"
    write_candidates(out_path, candidates)
    return out_path


def run_evaluate(manifest: RunManifest, candidate_paths: list[str], with_human: bool = False) -> tuple[Path, Path]:
    """Score candidate files against the corpus and write CSV and text
    reports."""
    corpus = load_corpus(manifest.corpus)
    reports = []
    for path in candidate_paths:
        candidates = load_candidates(path, corpus)
        reports.append(metrics_mod.evaluate_system(corpus, candidates))
    if with_human:
        reports.append(metrics_mod.human_upper_bound(corpus, seed=manifest.seed))
    out_dir = Path(manifest.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "report.csv"
    text_path = out_dir / "report.txt"
    csv_path.write_text(metrics_mod.render_report_csv(reports), encoding="utf-8")
    text_path.write_text(metrics_mod.render_report_text(reports), encoding="utf-8")
    return csv_path, text_path


def _cmd_ingest(args) -> int:
    corpus = load_corpus(args.corpus)
    counts: dict[str, int] = {}
    for ex in corpus:
        counts[ex.dataset] = counts.get(ex.dataset, 0) + 1
    print(json.dumps({"examples": len(corpus), "by_dataset": counts}, sort_keys=True))
    return EXIT_OK


def _cmd_stats(args) -> int:
    corpus = load_corpus(args.corpus)
    report = corpus_stats(corpus, seed=args.seed)
    payload = {
        "overall": vars(report.overall),
        "per_dataset": {ds: vars(s) for ds, s in report.per_dataset.items()},
        "compression_quartiles": {
            ds: dict(zip(("min", "q1", "median", "q3", "max"), quart))
            for ds, quart in report.compression_quartiles.items()
        },
    }
    print(json.dumps(payload, sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_split(args) -> int:
    ratios = tuple(float(x) for x in args.ratios.split(","))
    if len(ratios) != 3:
        raise UsageError("--ratios needs three comma-separated fractions")
    corpus = load_corpus(args.corpus)
    train, val, test = split_corpus(corpus, seed=args.seed, ratios=ratios)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("val", val), ("test", test)):
        save_corpus(part, out_dir / f"{name}.jsonl")
    print(json.dumps({"train": len(train), "val": len(val), "test": len(test)}))
    return EXIT_OK


def _cmd_summarize(args) -> int:
    manifest = RunManifest.resolve(args)
    out_path = run_summarize(manifest)
    print(out_path)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    manifest = RunManifest.resolve(args)
    csv_path, text_path = run_evaluate(manifest, args.candidates, with_human=args.human)
    print(text_path.read_text(encoding="utf-8"), end="")
    print(csv_path)
    return EXIT_OK


def _cmd_report(args) -> int:
    if args.study_log:
        records = load_annotation_records(args.study_log)
        modes = ("per-response", "majority") if args.mode == "both" else (args.mode,)
        out = [aggregate_report(records, args.annotators_per_cell, mode=m, partial=args.partial).to_dict() for m in modes]
        print(json.dumps(out[0] if len(out) == 1 else {"reports": out}, indent=2, sort_keys=True))
        return EXIT_OK
    if not args.csv:
        raise UsageError("report needs --csv or --study-log")
    rows = Path(args.csv).read_text(encoding="utf-8").strip().splitlines()
    cells = [row.split(",") for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
    for row in cells:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return EXIT_OK


def _cmd_study_serve(args) -> int:
    import uvicorn

    from .service import build_app

    store = StudyStore(args.log)
    if args.items and not store.items:
        items = _load_items(args.items)
        store.create_study(items, annotators_per_cell=args.annotators_per_cell)
    selection_corpus = load_corpus(args.corpus) if args.corpus else None
    instructions = None
    if args.instructions:
        instructions = json.loads(Path(args.instructions).read_text(encoding="utf-8"))
    token = args.token or os.environ.get("STUDY_API_TOKEN")
    app = build_app(store, api_token=token, instructions=instructions, selection_corpus=selection_corpus)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _load_items(path: str):
    from .study import StudyItem

    items = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: invalid JSON on line {line_no}: {exc}") from exc
            items.append(
                StudyItem(
                    example_id=obj["example_id"],
                    question=obj["question"],
                    long_answer=obj["long_answer"],
                    variants=obj["variants"],
                )
            )
    return items


def _cmd_study_export(args) -> int:
    store = StudyStore(args.log)
    for record in store.export_records():
        print(json.dumps(record, ensure_ascii=False, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ansum", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--corpus", help="corpus JSONL path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--manifest", help="JSON manifest file; flags override its values")

    p = sub.add_parser("ingest", help="validate a corpus file")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=13)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("split", help="train/val/test split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--ratios", default="0.7,0.15,0.15")
    p.add_argument("--out", default="splits")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("summarize", help="run a summarization system")
    add_common(p)
    p.add_argument("--system", help="lead2|lead3|overlap|gold|external-extract|decontext:<backend>|abstractive:<flags>")
    p.add_argument("--out", default=None)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("evaluate", help="score candidate files against the corpus")
    add_common(p)
    p.add_argument("--candidates", nargs="+", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--human", action="store_true", help="append the inter-annotator upper bound row")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="render an evaluation CSV or aggregate a study log")
    p.add_argument("--csv")
    p.add_argument("--study-log")
    p.add_argument("--mode", default="both", choices=("per-response", "majority", "both"))
    p.add_argument("--annotators-per-cell", type=int, default=3)
    p.add_argument("--partial", action="store_true")
    p.set_defaults(func=_cmd_report)

    study = sub.add_parser("study", help="study service administration")
    study_sub = study.add_subparsers(dest="study_command", required=True)

    p = study_sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--log", required=True, help="append-only study log path")
    p.add_argument("--items", help="study items JSONL (required on first run)")
    p.add_argument("--annotators-per-cell", type=int, default=3)
    p.add_argument("--corpus", help="corpus for sentence-selection tasks")
    p.add_argument("--instructions", help="JSON file with instruction texts")
    p.add_argument("--token", help="bearer token (or STUDY_API_TOKEN env)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.set_defaults(func=_cmd_study_serve)

    p = study_sub.add_parser("export", help="dump all annotation records")
    p.add_argument("--log", required=True)
    p.set_defaults(func=_cmd_study_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EndpointError as exc:
        print(f"endpoint error: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
