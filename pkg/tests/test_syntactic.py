import math
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lakemend.errors import ConfigError, IngestError
from lakemend.model import serialize_record
from lakemend.syntactic import InvertedIndex, tokenize

from conftest import make_tuple, random_lake_files
from lakemend.ingest import register_lake


class TestTokenize:
    def test_word_shorter_than_q_kept_whole(self):
        assert tokenize("BT", 3) == ["bt"]

    def test_gram_enumeration(self):
        assert tokenize("blood", 3) == ["blood", "blo", "loo", "ood"]

    def test_split_on_non_alphanumeric_runs(self):
        assert tokenize("O-Neg 2", 3) == ["o", "neg", "2"]

    def test_underscore_is_a_separator(self):
        out = tokenize("Blood_Type: B+")
        assert out == ["blood", "blo", "loo", "ood", "type", "typ", "ype", "b"]

    def test_name_grams(self):
        assert tokenize("Zidane") == ["zidane", "zid", "ida", "dan", "ane"]

    def test_empty_text(self):
        assert tokenize("") == []

    def test_casefold(self):
        assert tokenize("BLOOD") == tokenize("blood")

    def test_custom_q(self):
        assert tokenize("ab", 1) == ["ab", "a", "b"]
        # at q=4 a 4-char word emits no grams
        assert tokenize("abcd", 4) == ["abcd"]

    def test_q_below_one_rejected(self):
        with pytest.raises(ConfigError):
            tokenize("x", 0)

    @given(st.text(max_size=40), st.integers(min_value=1, max_value=5))
    def test_tokens_lowercase_and_nonempty(self, text, q):
        for token in tokenize(text, q):
            assert token
            assert token == token.casefold()

    @given(st.from_regex(r"[a-z0-9]{1,12}", fullmatch=True), st.integers(min_value=1, max_value=5))
    def test_single_word_token_count(self, word, q):
        out = tokenize(word, q)
        expected = 1 + (len(word) - q + 1 if len(word) > q else 0)
        assert len(out) == expected
        assert out[0] == word


class TestBuild:
    def test_single_tuple_postings(self):
        t = make_tuple("t-00000000", 0, A="xy")
        index = InvertedIndex.build([t])
        assert index.doc_count == 1
        assert index.postings["xy"] == [(0, 1)]
        assert index.refs == [t.ref]

    def test_duplicate_tuples_same_length_distinct_refs(self):
        t0 = make_tuple("t-00000000", 0, A="same")
        t1 = make_tuple("t-00000000", 1, A="same")
        index = InvertedIndex.build([t0, t1])
        assert index.doc_len[0] == index.doc_len[1]
        assert index.refs == [t0.ref, t1.ref]

    def test_empty_lake_rejected(self):
        with pytest.raises(IngestError):
            InvertedIndex.build([])

    def test_refs_in_canonical_order(self, rng):
        lake = register_lake(random_lake_files(rng, tables=2, rows=4))
        shuffled = list(lake.tuples())
        rng.shuffle(shuffled)
        index = InvertedIndex.build(shuffled)
        assert index.refs == [t.ref for t in lake.tuples()]

    def test_statistics_match_naive_recount(self, rng):
        lake = register_lake(random_lake_files(rng, tables=2, rows=5))
        index = InvertedIndex.build(lake.tuples())
        docs = [tokenize(serialize_record(t)) for t in lake.tuples()]
        assert index.doc_len == [len(d) for d in docs]
        assert index.avg_doc_len == pytest.approx(sum(len(d) for d in docs) / len(docs))
        recount: dict[str, list[tuple[int, int]]] = {}
        for idx, d in enumerate(docs):
            for token, tf in sorted(Counter(d).items()):
                recount.setdefault(token, []).append((idx, tf))
        assert index.postings == recount


# reference implementations kept deliberately separate from the package

def _ref_tokens(text: str, q: int = 3) -> list[str]:
    out: list[str] = []
    word = ""
    for ch in text.casefold() + "\x00":
        if ch.isalnum() and ch != "_":
            word += ch
            continue
        if word:
            out.append(word)
            if len(word) > q:
                i = 0
                while i + q <= len(word):
                    out.append(word[i : i + q])
                    i += 1
            word = ""
    return out


def _ref_bm25(doc_texts: list[str], query: str, k1: float = 1.2, b: float = 0.75) -> list[float]:
    docs = [_ref_tokens(d) for d in doc_texts]
    n_docs = len(docs)
    avgdl = sum(len(d) for d in docs) / n_docs
    scores = []
    for d in docs:
        total = 0.0
        for qt in _ref_tokens(query):
            tf = d.count(qt)
            if tf == 0:
                continue
            df = sum(1 for other in docs if qt in other)
            idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
            total += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len(d) / avgdl))
        scores.append(total)
    return scores


class TestQuery:
    def _hand_corpus(self):
        values = [
            "blood type donor",
            "blood bank record",
            "type of tissue",
            "donor registry",
            "unrelated words here",
        ]
        tuples = [make_tuple("corpus-00000000", i, A=v) for i, v in enumerate(values)]
        doc_texts = [f"[A : {v}]" for v in values]
        return tuples, doc_texts

    def test_scores_match_independent_scalar_bm25(self):
        tuples, doc_texts = self._hand_corpus()
        index = InvertedIndex.build(tuples)
        expected = _ref_bm25(doc_texts, "blood type")
        got = dict(index.query("blood type", 5))
        for i, t in enumerate(tuples):
            if expected[i] > 0.0:
                assert got[t.ref] == pytest.approx(expected[i], abs=1e-9)
            else:
                assert t.ref not in got

    def test_self_retrieval(self, fixture_lake):
        index = InvertedIndex.build(fixture_lake.tuples(), lake_digest=fixture_lake.digest)
        for t in fixture_lake.tuples():
            top = index.query(serialize_record(t), 1)
            assert top[0][0] == t.ref

    def test_no_token_overlap_gives_empty(self, fixture_lake):
        index = InvertedIndex.build(fixture_lake.tuples())
        assert index.query("@@@ ###", 10) == []

    def test_n_below_one_rejected(self, fixture_lake):
        index = InvertedIndex.build(fixture_lake.tuples())
        with pytest.raises(ConfigError):
            index.query("x", 0)

    def test_result_length_capped_at_n(self):
        tuples = [make_tuple("t-00000000", i, A=f"blood {i}") for i in range(6)]
        index = InvertedIndex.build(tuples)
        assert len(index.query("blood", 3)) == 3

    def test_equal_scores_tie_on_table_then_row(self):
        a = make_tuple("alpha-00000000", 0, A="same text")
        b0 = make_tuple("beta-00000000", 0, A="same text")
        b1 = make_tuple("beta-00000000", 1, A="same text")
        index = InvertedIndex.build([b1, a, b0])
        ranked = index.query("same", 3)
        assert [r for r, _ in ranked] == [a.ref, b0.ref, b1.ref]
        assert ranked[0][1] == ranked[1][1] == ranked[2][1]

    def test_disjoint_additions_preserve_rank_order(self):
        # equal-length docs so the length norm cancels; only tf separates them
        a = make_tuple("t-00000000", 0, A="blood blood")
        b = make_tuple("t-00000000", 1, A="blood curds")
        base = InvertedIndex.build([a, b])
        before = [r for r, _ in base.query("blood", 10)]
        extra = [make_tuple("t-00000000", 2 + i, A="zz qq ww") for i in range(4)]
        grown = InvertedIndex.build([a, b, *extra])
        after = [r for r, _ in grown.query("blood", 10)]
        assert before == [a.ref, b.ref]
        assert after == before

    def test_idf_formula(self):
        tuples, _ = self._hand_corpus()
        index = InvertedIndex.build(tuples)
        df = len(index.postings["blood"])
        assert df == 2
        expected = math.log(1.0 + (5 - df + 0.5) / (df + 0.5))
        assert index.idf("blood") == pytest.approx(expected, abs=1e-12)
        # unseen token gets the df=0 idf, not an error
        assert index.idf("zzzz") == pytest.approx(math.log(1.0 + 5.5 / 0.5), abs=1e-12)

    def test_custom_q_changes_grams(self):
        t = make_tuple("t-00000000", 0, A="abcd")
        wide = InvertedIndex.build([t], q=4)
        assert "abc" not in wide.postings
        assert "abcd" in wide.postings

    def test_determinism_same_build_same_body(self, rng):
        lake = register_lake(random_lake_files(rng, tables=2, rows=5))
        one = InvertedIndex.build(lake.tuples(), lake_digest=lake.digest)
        two = InvertedIndex.build(lake.tuples(), lake_digest=lake.digest)
        assert one.to_body() == two.to_body()
        assert one.query("alpha beta", 10) == two.query("alpha beta", 10)
