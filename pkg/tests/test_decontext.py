import pytest
from hypothesis import given
from hypothesis import strategies as st

from ansum.decontext import (
    Category,
    DecontextRequest,
    DecontextResult,
    decontextualize,
    edit_stats,
    parse_response,
    rule_based_decontext,
    serialize_request,
    should_decontextualize,
    title_for,
)
from ansum.errors import AnsumError, DataError, TransportError

from conftest import make_example


class TestGating:
    def test_opening_sentence_present(self, example):
        assert should_decontextualize(example, {0, 2}) is None

    def test_fires_with_min_index(self):
        ex = make_example(sentences=[f"Sentence {i} has filler words." for i in range(5)])
        assert should_decontextualize(ex, {2, 4}) == 2

    def test_empty_selection_rejected(self, example):
        with pytest.raises(DataError):
            should_decontextualize(example, set())

    @given(st.sets(st.integers(0, 2), min_size=1))
    def test_fires_exactly_when_zero_absent(self, selected, example=None):
        ex = make_example()
        got = should_decontextualize(ex, selected)
        if 0 in selected:
            assert got is None
        else:
            assert got == min(selected)


class TestTitleFor:
    def test_title_passthrough(self):
        ex = make_example(dataset="nq", title="Coca-Cola")
        assert title_for(ex) == "Coca-Cola"

    def test_question_fallback(self):
        ex = make_example(dataset="eli5", title=None)
        assert title_for(ex) == ex.question

    def test_null_title_falls_back(self):
        ex = make_example(dataset="nq", title=None)
        assert title_for(ex) == ex.question


class TestSerialize:
    def test_target_last(self):
        req = DecontextRequest("T", ("A", "B"), 1)
        assert serialize_request(req) == "[CLS] T [s] A [s] B [s]"

    def test_target_first_collapses_empty_pre_context(self):
        req = DecontextRequest("T", ("A", "B"), 0)
        assert serialize_request(req) == "[CLS] T [s] A [s] B [s]"

    def test_single_sentence(self):
        req = DecontextRequest("T", ("A",), 0)
        assert serialize_request(req) == "[CLS] T [s] A [s]"

    def test_middle_target(self):
        req = DecontextRequest("T", ("A", "B", "C"), 1)
        assert serialize_request(req) == "[CLS] T [s] A [s] B [s] C [s]"

    def test_empty_title_rejected(self):
        with pytest.raises(DataError):
            DecontextRequest(" ", ("A",), 0)

    def test_target_out_of_range(self):
        with pytest.raises(DataError):
            DecontextRequest("T", ("A",), 1)

    @given(st.integers(1, 8), st.data())
    def test_never_doubles_separators(self, k, data):
        target = data.draw(st.integers(0, k - 1))
        sentences = tuple(f"S{i} text." for i in range(k))
        rendered = serialize_request(DecontextRequest("Some title", sentences, target))
        assert "[s] [s]" not in rendered
        assert "[s][s]" not in rendered
        assert rendered.startswith("[CLS] ")
        assert rendered.endswith(" [s]")


class TestParseResponse:
    def test_done(self):
        result = parse_response("DONE [SEP] The eyes send signals.", "They send signals.")
        assert result.category is Category.DONE
        assert result.text == "The eyes send signals."
        assert result.edited

    def test_unnecessary_keeps_original(self):
        result = parse_response("UNNECESSARY [SEP] x", "Original text.")
        assert result.category is Category.UNNECESSARY
        assert result.text == "Original text."
        assert not result.edited

    def test_infeasible_keeps_original(self):
        result = parse_response("Infeasible [SEP] whatever", "Original text.")
        assert result.text == "Original text."

    def test_missing_separator(self):
        with pytest.raises(DataError, match=r"\[SEP\]"):
            parse_response("oops", "x")

    def test_unknown_category(self):
        with pytest.raises(DataError, match="category"):
            parse_response("MAYBE [SEP] y", "x")


class TestResultInvariants:
    def test_edited_must_mirror_done(self):
        with pytest.raises(AnsumError):
            DecontextResult(Category.DONE, "a", "a", edited=False)

    def test_unedited_text_must_equal_original(self):
        with pytest.raises(AnsumError):
            DecontextResult(Category.UNNECESSARY, "changed", "original", edited=False)


BRAIN_CONTEXT = "The brain perceives motion because it receives information from the eyes, ears, and muscles."


class TestRuleBased:
    def test_unique_plural_antecedent(self):
        req = DecontextRequest(
            "Why does car sickness hit hardest when reading?",
            (
                BRAIN_CONTEXT,
                "These parts send conflicting information, and this causes motion sickness.",
            ),
            1,
        )
        result = rule_based_decontext(req)
        assert result.category is Category.DONE
        assert result.text == (
            "The eyes, ears, and muscles send conflicting information, and this causes motion sickness."
        )

    def test_no_anaphor_is_unnecessary(self):
        req = DecontextRequest(
            "T", ("The sun is a star.", "Plants need light to grow."), 1
        )
        result = rule_based_decontext(req)
        assert result.category is Category.UNNECESSARY
        assert result.text == "Plants need light to grow."

    def test_ambiguous_antecedents_infeasible(self):
        req = DecontextRequest(
            "T", ("The tree stood near a fence in the yard.", "It grew."), 1
        )
        result = rule_based_decontext(req)
        assert result.category is Category.INFEASIBLE

    def test_no_candidate_infeasible(self):
        req = DecontextRequest("T", ("Nothing much here.", "They left early."), 1)
        assert rule_based_decontext(req).category is Category.INFEASIBLE

    def test_bare_this_with_stop_word(self):
        req = DecontextRequest(
            "T", ("The engine stalled badly.", "This is why we stopped."), 1
        )
        result = rule_based_decontext(req)
        assert result.category is Category.DONE
        assert result.text == "The engine is why we stopped."

    @given(st.sampled_from([
        "These parts send conflicting information onward.",
        "It grew very quickly last year.",
        "They kept their assets safe.",
        "Plants need light to grow.",
        "This system works well enough.",
    ]))
    def test_suffix_preserved(self, target):
        req = DecontextRequest(
            "T",
            (BRAIN_CONTEXT, target),
            1,
        )
        result = rule_based_decontext(req)
        if result.category is Category.DONE:
            # everything after the anaphor span must be byte-identical
            n = 1
            while n <= len(target) and result.text.endswith(target[-n:]):
                n += 1
            preserved = target[-(n - 1):] if n > 1 else ""
            words_changed = target[: len(target) - len(preserved)]
            assert len(words_changed.split()) <= 2
        else:
            assert result.text == target


class StubBackend:
    def __init__(self, output):
        self.output = output
        self.inputs = []

    def complete(self, text, tag=""):
        if isinstance(self.output, Exception):
            raise self.output
        self.inputs.append(text)
        return self.output


class TestDecontextualize:
    def test_gate_short_circuit(self, example):
        candidate, result = decontextualize(example, {0, 2}, backend="rules")
        assert result is None
        assert candidate.summary_text == example.annotation_text({0, 2})

    def test_done_splices_first_sentence(self):
        ex = make_example(
            sentences=[
                "Switzerland was neutral during the war.",
                "The Nazis and the allies both kept their assets there.",
                "Invading would have frozen everyone's funds.",
            ],
            annotations=({1, 2}, {1}, {2}),
        )
        backend = StubBackend("DONE [SEP] The Nazis and the allies both kept their assets in Switzerland.")
        candidate, result = decontextualize(ex, {1, 2}, backend=backend)
        assert result.category is Category.DONE
        assert candidate.summary_text == (
            "The Nazis and the allies both kept their assets in Switzerland. "
            "Invading would have frozen everyone's funds."
        )
        # selection is unchanged by the rewrite
        assert candidate.selected == frozenset({1, 2})

    def test_request_serialization_includes_title(self):
        ex = make_example(title=None, question="How did Switzerland stay out of the war?")
        backend = StubBackend("UNNECESSARY [SEP] x")
        decontextualize(ex, {1}, backend=backend)
        assert backend.inputs[0].startswith("[CLS] How did Switzerland stay out of the war? [s] ")

    def test_non_done_leaves_text_byte_identical(self, example):
        rendered = example.annotation_text({1})
        backend = StubBackend("INFEASIBLE [SEP] ignored")
        candidate, result = decontextualize(example, {1}, backend=backend)
        assert candidate.summary_text == rendered
        assert result.category is Category.INFEASIBLE

    def test_backend_failure_degrades_to_rules(self):
        ex = make_example(
            sentences=[
                BRAIN_CONTEXT,
                "These parts send conflicting information, and this causes motion sickness.",
                "Reading in a car makes the mismatch worse.",
            ],
            annotations=({1}, {1}, {1, 2}),
        )
        backend = StubBackend(TransportError("endpoint down", attempts=3))
        candidate, result = decontextualize(ex, {1}, backend=backend)
        assert result.category is Category.DONE
        assert candidate.summary_text.startswith("The eyes, ears, and muscles send")

    def test_malformed_backend_output_degrades(self, example):
        backend = StubBackend("not the wire format")
        candidate, result = decontextualize(example, {1}, backend=backend)
        assert result is not None
        assert candidate.summary_text is not None


class TestEditStats:
    def test_all_unnecessary(self):
        results = [DecontextResult.make(Category.UNNECESSARY, "Keep this text.") for _ in range(4)]
        stats = edit_stats(results)
        assert stats.pct_unnecessary == 100.0
        assert stats.pct_done == 0.0
        assert stats.mean_length_increase_pct is None

    def test_doubling_sentence_is_hundred_percent(self):
        results = [DecontextResult.make(Category.DONE, "two words", "now four words total")]
        stats = edit_stats(results)
        assert stats.mean_length_increase_pct == pytest.approx(100.0)

    def test_distribution_sums_to_hundred(self):
        results = [
            DecontextResult.make(Category.UNNECESSARY, "a b"),
            DecontextResult.make(Category.INFEASIBLE, "c d"),
            DecontextResult.make(Category.DONE, "e f", "e f g"),
        ]
        stats = edit_stats(results)
        total = stats.pct_unnecessary + stats.pct_infeasible + stats.pct_done
        assert total == pytest.approx(100.0)
        assert stats.mean_length_increase_pct == pytest.approx(50.0)

    def test_empty(self):
        stats = edit_stats([])
        assert stats.count == 0
        assert stats.mean_length_increase_pct is None
