import json
from pathlib import Path

import pytest

from ansum.corpus import Corpus, QAExample


def make_example(
    id="ex1",
    dataset="eli5",
    question="Why is the sky blue?",
    title=None,
    sentences=None,
    annotations=({0}, {1}, {0, 1}),
):
    sentences = sentences or [
        "The sky looks blue because air scatters short wavelengths the most.",
        "Violet light scatters even more but our eyes are less sensitive to it.",
        "At sunset the light path is longer so the blue is scattered away.",
    ]
    return QAExample(
        id=id,
        dataset=dataset,
        question=question,
        title=title,
        answer_sentences=tuple(sentences),
        summary_annotations=tuple(frozenset(a) for a in annotations),
    )


def make_corpus(examples, provenance="memory"):
    return Corpus(tuple(examples), provenance=provenance)


@pytest.fixture
def example():
    return make_example()


@pytest.fixture
def toy_corpus():
    return make_corpus(
        [
            make_example(id="a1", dataset="eli5"),
            make_example(
                id="a2",
                dataset="nq",
                title="Rayleigh scattering",
                question="what makes the sky appear blue",
                annotations=({1}, {1}, {1, 2}),
            ),
            make_example(
                id="a3",
                dataset="webgpt",
                sentences=[
                    "Light from the sun is white.",
                    "Air molecules scatter blue light more strongly than red.",
                    "That scattering fills the sky with blue light.",
                    "Dust can change the color too.",
                ],
                annotations=({1, 2}, {2}, {1}),
            ),
        ]
    )


def write_corpus_file(path: Path, examples):
    with path.open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "id": ex.id,
                        "dataset": ex.dataset,
                        "question": ex.question,
                        "title": ex.title,
                        "answer_sentences": list(ex.answer_sentences),
                        "summary_annotations": [sorted(a) for a in ex.summary_annotations],
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return path


@pytest.fixture
def corpus_file(tmp_path, toy_corpus):
    return write_corpus_file(tmp_path / "corpus.jsonl", toy_corpus)


# One line per acceptance criterion in the terminal summary.
_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "setup" and report.skipped:
        reason = ""
        if isinstance(report.longrepr, tuple):
            reason = f"  ({report.longrepr[2].removeprefix('Skipped: ')})"
        _ACCEPTANCE.append((name, "SKIP", reason))
    elif report.when == "call":
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        reason = ""
        if report.skipped and isinstance(report.longrepr, tuple):
            reason = f"  ({report.longrepr[2].removeprefix('Skipped: ')})"
        _ACCEPTANCE.append((name, status, reason))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, status, reason in _ACCEPTANCE:
        terminalreporter.write_line(f"{status:<5} {name}{reason}")
