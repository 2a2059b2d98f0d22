import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ansum.errors import DataError
from ansum.extract import SummaryCandidate, lead_k
from ansum.metrics import (
    EvalReport,
    best_ref_classification,
    bert_score_f1,
    evaluate_system,
    exact_match,
    human_upper_bound,
    lcs_len,
    length_stats,
    prf,
    render_report_csv,
    render_report_text,
    rouge_best,
    rouge_l_f1,
)

from conftest import make_corpus, make_example


class TestPRF:
    def test_identity(self):
        assert prf({1}, {1}) == (1.0, 1.0, 1.0)

    def test_disjoint(self):
        assert prf({1, 2}, {3}) == (0.0, 0.0, 0.0)

    def test_partial(self):
        p, r, f1 = prf({1, 2}, {1, 2, 4})
        assert p == pytest.approx(1.0)
        assert r == pytest.approx(2 / 3)
        assert f1 == pytest.approx(0.8)

    def test_empty_prediction(self):
        assert prf(set(), {1}) == (0.0, 0.0, 0.0)

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            prf({1}, set())

    @given(
        st.sets(st.integers(0, 8)),
        st.sets(st.integers(0, 8), min_size=1),
    )
    def test_bounds(self, pred, ref):
        p, r, f1 = prf(pred, ref)
        for v in (p, r, f1):
            assert 0.0 <= v <= 1.0


REFS = tuple(frozenset(s) for s in ({0}, {0, 2}, {1}))


class TestBestRef:
    def test_picks_max_f1(self):
        score = best_ref_classification({0, 2}, REFS)
        assert score.f1 == 1.0
        assert score.chosen_ref == 1
        assert score.exact_match

    def test_tie_takes_lowest_index(self):
        refs = (frozenset({1}),) * 3
        assert best_ref_classification({1}, refs).chosen_ref == 0

    def test_all_disjoint(self):
        score = best_ref_classification({5}, REFS)
        assert score.f1 == 0.0
        assert score.chosen_ref == 0
        assert not score.exact_match

    @given(st.sets(st.integers(0, 5)), st.lists(st.sets(st.integers(0, 5), min_size=1), min_size=3, max_size=3))
    def test_max_property(self, pred, refs):
        refs = tuple(frozenset(r) for r in refs)
        best = best_ref_classification(pred, refs)
        for ref in refs:
            assert best.f1 >= prf(pred, ref)[2]

    @given(st.sets(st.integers(0, 5)), st.lists(st.sets(st.integers(0, 5), min_size=1), min_size=3, max_size=3))
    def test_exact_match_implies_perfect_f1(self, pred, refs):
        refs = tuple(frozenset(r) for r in refs)
        if exact_match(pred, refs) and pred:
            assert best_ref_classification(pred, refs).f1 == pytest.approx(1.0)


class TestExactMatch:
    def test_match_any(self):
        assert exact_match({1}, (frozenset({2}), frozenset({1})))

    def test_subset_is_not_match(self):
        assert not exact_match({0}, (frozenset({0, 1}), frozenset({0, 2})))

    def test_order_free(self):
        assert exact_match({2, 1}, (frozenset({1, 2}),))


def lcs_brute_force(a, b):
    """Independent oracle: enumerate all subsequences of a."""
    best = 0
    for mask in range(1 << len(a)):
        sub = [a[i] for i in range(len(a)) if mask >> i & 1]
        it = iter(b)
        if all(tok in it for tok in sub):
            best = max(best, len(sub))
    return best


class TestLCS:
    def test_identity(self):
        assert lcs_len(list("wxyz"), list("wxyz")) == 4

    def test_disjoint(self):
        assert lcs_len(list("ab"), list("cd")) == 0

    def test_small_case(self):
        assert lcs_len(["a", "b", "c"], ["a", "c", "d"]) == 2

    def test_exhaustive_small_alphabet(self):
        words = [
            list(p)
            for n in range(0, 6)
            for p in itertools.product("ab", repeat=n)
        ]
        for a in words:
            for b in words:
                assert lcs_len(a, b) == lcs_brute_force(a, b), (a, b)

    @settings(max_examples=300, deadline=None)
    @given(
        st.lists(st.sampled_from("abc"), max_size=8),
        st.lists(st.sampled_from("abc"), max_size=8),
    )
    def test_matches_brute_force(self, a, b):
        assert lcs_len(a, b) == lcs_brute_force(a, b)


class TestRouge:
    def test_self(self):
        assert rouge_l_f1("the cat sat", "the cat sat") == 1.0

    def test_disjoint(self):
        assert rouge_l_f1("aa bb", "cc dd") == 0.0

    def test_partial(self):
        assert rouge_l_f1("a b c", "a c d") == pytest.approx(2 / 3)

    def test_empty_side(self):
        assert rouge_l_f1("", "something") == 0.0

    def test_best_ref_is_recorded(self):
        refs = ["purely alpha words", "totally beta words", "the cat sat down"]
        score = rouge_best("the cat sat down", refs)
        assert score.chosen_ref == 2
        assert score.rouge_l_f1 == 1.0


class OneHotEmbedder:
    """Orthogonal unit vectors per vocabulary type."""

    def __init__(self, vocab):
        self.index = {tok: i for i, tok in enumerate(sorted(vocab))}

    def embed(self, tokens):
        vectors = np.zeros((len(tokens), len(self.index)))
        for row, tok in enumerate(tokens):
            vectors[row, self.index[tok]] = 1.0
        return vectors


def unigram_f1_oracle(cand_tokens, ref_tokens):
    ref_types = set(ref_tokens)
    cand_types = set(cand_tokens)
    p = sum(1 for t in cand_tokens if t in ref_types) / len(cand_tokens)
    r = sum(1 for t in ref_tokens if t in cand_types) / len(ref_tokens)
    return 2 * p * r / (p + r) if p + r else 0.0


class TestBertScore:
    def test_self_match(self):
        emb = OneHotEmbedder({"a", "b"})
        assert bert_score_f1("a b", "a b", emb) == pytest.approx(1.0)

    def test_one_hot_reduces_to_unigram_f1(self):
        emb = OneHotEmbedder({"a", "b", "c"})
        assert bert_score_f1("a b", "a c", emb) == pytest.approx(0.5)

    def test_empty_candidate(self):
        emb = OneHotEmbedder({"a"})
        assert bert_score_f1("", "a", emb) == 0.0

    def test_dimension_mismatch(self):
        class Bad:
            def embed(self, tokens):
                return np.ones((len(tokens), 2 + len(tokens)))

        with pytest.raises(DataError, match="dimension"):
            bert_score_f1("a b", "a", Bad())

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.sampled_from("abcd"), min_size=1, max_size=8),
        st.lists(st.sampled_from("abcd"), min_size=1, max_size=8),
    )
    def test_one_hot_equivalence_property(self, cand, ref):
        emb = OneHotEmbedder(set(cand) | set(ref))
        got = bert_score_f1(" ".join(cand), " ".join(ref), emb)
        assert got == pytest.approx(unigram_f1_oracle(cand, ref))


class TestLengthStats:
    def test_mean_over_candidates(self):
        cands = [
            SummaryCandidate("a", "sys", frozenset(), " ".join(["tok"] * 10)),
            SummaryCandidate("b", "sys", frozenset(), " ".join(["tok"] * 20)),
        ]
        tokens, sentences = length_stats(cands)
        assert tokens == 15.0

    def test_empty_candidate(self):
        tokens, sentences = length_stats([SummaryCandidate("a", "sys", frozenset(), "")])
        assert (tokens, sentences) == (0.0, 0.0)

    def test_sentences_from_selection(self):
        cands = [SummaryCandidate("a", "sys", frozenset({0, 2}), "One. Two.")]
        _, sentences = length_stats(cands)
        assert sentences == 2.0


class TestEvaluateSystem:
    def test_gold_replay(self, toy_corpus):
        cands = [
            SummaryCandidate.from_selection(ex, "gold", ex.summary_annotations[0])
            for ex in toy_corpus
        ]
        report = evaluate_system(toy_corpus, cands)
        assert report.f1 == pytest.approx(1.0)
        assert report.em_pct == pytest.approx(100.0)
        assert report.rouge_l == pytest.approx(1.0)

    def test_missing_candidate(self, toy_corpus):
        cands = [SummaryCandidate.from_selection(ex, "lead2", frozenset({0})) for ex in list(toy_corpus)[:-1]]
        with pytest.raises(DataError, match="a3"):
            evaluate_system(toy_corpus, cands)

    def test_unknown_candidate_id(self, toy_corpus):
        cands = [SummaryCandidate.from_selection(ex, "x", frozenset({0})) for ex in toy_corpus]
        cands.append(SummaryCandidate("ghost", "x", frozenset({0}), "Hello there."))
        with pytest.raises(DataError, match="ghost"):
            evaluate_system(toy_corpus, cands)

    def test_empty_corpus(self):
        with pytest.raises(DataError):
            evaluate_system(make_corpus([]), [])

    def test_abstractive_candidates_skip_classification(self, toy_corpus):
        cands = [SummaryCandidate(ex.id, "abs", frozenset(), ex.answer_sentences[0]) for ex in toy_corpus]
        report = evaluate_system(toy_corpus, cands)
        assert report.f1 is None
        assert report.em_pct is None
        assert report.rouge_l > 0


class TestHumanUpperBound:
    def test_identical_annotations_scores_one(self):
        ex = make_example(annotations=({0, 1}, {0, 1}, {0, 1}))
        report = human_upper_bound(make_corpus([ex]), seed=0)
        assert report.f1 == pytest.approx(1.0)
        assert report.em_pct == pytest.approx(100.0)
        assert report.rouge_l == pytest.approx(1.0)

    def test_deterministic(self, toy_corpus):
        a = human_upper_bound(toy_corpus, seed=11)
        b = human_upper_bound(toy_corpus, seed=11)
        assert a == b


class TestRendering:
    def make_report(self):
        return EvalReport("lead2", 3, 0.5, 0.75, 0.6, 33.3, 0.553, None, 38.18, 2.0)

    def test_csv_columns(self):
        csv = render_report_csv([self.make_report()])
        header, row = csv.strip().splitlines()
        assert header == "system,P,R,F1,EM_pct,ROUGE_L,BERTScore,tokens,sentences"
        assert row.split(",")[0] == "lead2"
        assert row.split(",")[6] == ""  # BERTScore absent

    def test_text_is_aligned(self):
        text = render_report_text([self.make_report()])
        lines = text.splitlines()
        assert lines[0].startswith("system")
        assert "lead2" in lines[1]
