import pytest
from hypothesis import given
from hypothesis import strategies as st

from ansum.textproc import split_sentences, tokenize, unigram_overlap


class TestTokenize:
    def test_empty(self):
        assert tokenize("") == []

    def test_strips_punctuation(self):
        assert tokenize("The cat, sat.") == ["the", "cat", "sat"]

    def test_keeps_interior_punctuation(self):
        assert tokenize("U.S. taxes — 2009!") == ["u.s", "taxes", "2009"]

    def test_whitespace_only(self):
        assert tokenize("  \t\n ") == []

    @given(st.text())
    def test_idempotent_on_joined_output(self, text):
        once = tokenize(text)
        assert tokenize(" ".join(once)) == once

    @given(st.text())
    def test_tokens_are_nonempty_lowercase(self, text):
        for tok in tokenize(text):
            assert tok
            assert tok == tok.lower()
            assert not any(ch.isspace() for ch in tok)


class TestUnigramOverlap:
    def test_identity(self):
        assert unigram_overlap("blue sky", "blue sky") == 1.0

    def test_disjoint(self):
        assert unigram_overlap("blue sky", "green grass") == 0.0

    def test_subset_of_longer_text(self):
        assert unigram_overlap("the sky is blue", "why is the sky blue") == 1.0

    def test_empty_first_argument(self):
        assert unigram_overlap("", "anything") == 0.0

    def test_denominator_is_first_argument(self):
        # a has 4 types, 2 appear in b
        assert unigram_overlap("a b c d", "a b x y z") == 0.5

    @given(st.text(alphabet="ab ", max_size=30), st.integers(min_value=2, max_value=4))
    def test_insensitive_to_repetition(self, text, k):
        repeated = " ".join([text] * k)
        assert unigram_overlap(text, "a b") == unigram_overlap(repeated, "a b")


class TestSplitSentences:
    def test_two_plain_sentences(self):
        assert split_sentences("A. B.") == ["A.", "B."]

    def test_empty(self):
        assert split_sentences("") == []

    def test_abbreviation_not_a_boundary(self):
        assert split_sentences("Dr. Smith left. She returned.") == [
            "Dr. Smith left.",
            "She returned.",
        ]

    def test_question_and_exclamation(self):
        assert split_sentences("Really? Yes! Fine.") == ["Really?", "Yes!", "Fine."]

    def test_no_boundary_without_capital(self):
        assert split_sentences("pi is 3.14 roughly. see above.") == [
            "pi is 3.14 roughly. see above."
        ]

    def test_quote_start(self):
        got = split_sentences('He left. "Stay here," she said.')
        assert got == ["He left.", '"Stay here," she said.']

    @given(
        st.lists(
            st.sampled_from(
                ["The dog barked.", "Rain fell all day!", "Why not?", "Dr. Who arrived."]
            ),
            min_size=0,
            max_size=6,
        )
    )
    def test_reconstruction_modulo_whitespace(self, sentences):
        text = "  ".join(sentences)
        got = split_sentences(text)
        assert " ".join(" ".join(got).split()) == " ".join(text.split())
