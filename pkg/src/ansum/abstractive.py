"""Abstractive summarization through a prompted generation endpoint, with
question-echo removal."""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import QAExample
from .errors import DataError
from .extract import SummaryCandidate
from .textproc import split_sentences, unigram_overlap

ECHO_OVERLAP_BOUND = 0.75


@dataclass(frozen=True)
class AbstractiveConfig:
    length_control: bool = False
    include_question: bool = True
    max_output_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    @property
    def tag(self) -> str:
        parts = ["q+a" if self.include_question else "a"]
        if self.length_control:
            parts.append("l")
        return "abstractive:" + "+".join(parts)


def build_prompt(
    example: QAExample,
    config: AbstractiveConfig,
    selected_gold: set[int] | frozenset[int] | None = None,
) -> str:
    """Assemble the generation prompt; length control asks for as many
    sentences as the gold selection contains."""
    answer = " ".join(example.answer_sentences)
    if config.include_question:
        prefix = f"Q: {example.question} A: {answer} "
    else:
        prefix = f"{answer} "
    if config.length_control:
        if not selected_gold:
            raise DataError("length control requires a gold selection")
        return prefix + f"Summarize the above answer in {len(selected_gold)} sentences"
    return prefix + "Summarize the above answer."


def strip_question_echo(summary: str, question: str) -> str:
    """Drop leading sentences that mostly restate the question (strictly
    above 75% unigram overlap), never emptying the summary."""
    sentences = split_sentences(summary)
    while len(sentences) > 1 and unigram_overlap(sentences[0], question) > ECHO_OVERLAP_BOUND:
        sentences = sentences[1:]
    return " ".join(sentences)


def summarize_abstractive(
    example: QAExample,
    client,
    config: AbstractiveConfig,
    selected_gold: set[int] | frozenset[int] | None = None,
) -> SummaryCandidate:
    """Prompt the generation endpoint and postprocess the result."""
    prompt = build_prompt(example, config, selected_gold)
    text = client.generate(prompt, config.max_output_tokens, config.temperature, tag=example.id)
    if config.include_question:
        text = strip_question_echo(text, example.question)
    return SummaryCandidate(
        example_id=example.id,
        system=config.tag,
        selected=frozenset(),
        summary_text=text,
    )
