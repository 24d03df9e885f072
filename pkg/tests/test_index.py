import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import bm25_brute
from qeck.index import (DocumentRecord, DuplicateDocumentError, IndexFormatError,
                        IndexStateError, IndexStoreError, InvertedIndex, build_index)
from qeck.text import AnalyzerConfig, analyze

ANALYZER = AnalyzerConfig()


def _index(docs, path=None):
    return build_index(
        (DocumentRecord(doc_id, {}, list(terms)) for doc_id, terms in docs.items()),
        ANALYZER, path)


def _random_corpus(rng, max_docs=20, vocab=12):
    words = [f"w{i}" for i in range(vocab)]
    return {
        f"d{i:02d}": [rng.choice(words) for _ in range(rng.randint(0, 8))]
        for i in range(rng.randint(1, max_docs))
    }


def test_single_document():
    index = _index({"d1": ["screenshot", "android"]})
    assert index.doc_count == 1
    assert index.stats.avg_doc_length == 2.0


def test_duplicate_doc_id_rejected():
    index = InvertedIndex.create(None, ANALYZER)
    index.add_document(DocumentRecord("d1", {}, ["a"]))
    with pytest.raises(DuplicateDocumentError, match="d1"):
        index.add_document(DocumentRecord("d1", {}, ["b"]))


def test_average_length():
    index = _index({"a": ["x", "y"], "b": ["x", "y", "z", "w"], "c": ["p", "q"], "d": list("abcd")})
    assert index.stats.avg_doc_length == 3.0
    assert index.stats.analyzer_fingerprint == ANALYZER.fingerprint


def test_empty_index(tmp_path):
    index = _index({}, tmp_path / "idx")
    assert index.doc_count == 0
    assert index.stats.avg_doc_length == 0.0
    assert index.bm25_search(["anything"], 10) == []
    assert InvertedIndex.open(tmp_path / "idx").bm25_search(["anything"], 10) == []


def test_add_after_commit_and_read_before_commit():
    index = InvertedIndex.create(None, ANALYZER)
    index.add_document(DocumentRecord("d1", {}, ["a"]))
    with pytest.raises(IndexStateError):
        index.bm25_search(["a"], 1)
    index.commit()
    index.commit()
    assert index.doc_count == 1
    with pytest.raises(IndexStateError):
        index.add_document(DocumentRecord("d2", {}, ["a"]))


def test_search_example():
    index = _index({"d1": analyze("screenshot android", ANALYZER),
                    "d2": analyze("database query", ANALYZER)})
    hits = index.bm25_search(analyze("screenshot", ANALYZER), 10)
    assert [h.doc_id for h in hits] == ["d1"]
    assert hits[0].rank == 1 and hits[0].score > 0


def test_top_r_validation():
    index = _index({"d1": ["a"]})
    with pytest.raises(ValueError):
        index.bm25_search(["a"], 0)


def test_document_frequency_examples():
    index = _index({f"d{i}": ["common", f"t{i}"] for i in range(4)})
    assert index.document_frequency("common") == 4
    assert index.document_frequency("absent") == 0
    assert index.document_frequency("t2") == 1


def test_term_frequency_examples():
    index = _index({"d1": ["x", "y", "x", "x", "x"], "d2": ["y"]})
    assert index.term_frequency("x", "d1") == 4
    assert index.term_frequency("x", "d2") == 0
    with pytest.raises(KeyError):
        index.term_frequency("x", "nope")
    with pytest.raises(KeyError):
        index.document("nope")


@pytest.mark.parametrize("seed", range(10))
def test_df_tf_match_scan(seed):
    rng = random.Random(seed)
    docs = _random_corpus(rng)
    index = _index(docs)
    vocab = {t for terms in docs.values() for t in terms} | {"missing"}
    for term in vocab:
        assert index.document_frequency(term) == sum(1 for t in docs.values() if term in t)
        for doc_id, terms in docs.items():
            assert index.term_frequency(term, doc_id) == terms.count(term)
        assert index.postings(term) == sorted(
            (d, t.count(term)) for d, t in docs.items() if term in t)


@pytest.mark.parametrize("seed", range(20))
def test_bm25_matches_brute_force(seed):
    rng = random.Random(1000 + seed)
    docs = _random_corpus(rng, max_docs=20)
    index = _index(docs)
    for _ in range(5):
        query = [f"w{rng.randrange(14)}" for _ in range(rng.randint(1, 4))]
        expected = bm25_brute(docs, query)
        hits = index.bm25_search(query, 50)
        assert [h.doc_id for h in hits] == [d for d, _ in expected]
        for hit, (_, score) in zip(hits, expected):
            assert hit.score == pytest.approx(score, rel=1e-9)


def test_ties_broken_by_doc_id():
    index = _index({"b": ["x"], "a": ["x"], "c": ["x"]})
    assert [h.doc_id for h in index.bm25_search(["x"], 2)] == ["a", "b"]


def test_repeated_query_terms_count_twice():
    index = _index({"d1": ["x", "y"], "d2": ["y", "z"]})
    once = index.bm25_search(["x"], 1)[0].score
    twice = index.bm25_search(["x", "x"], 1)[0].score
    assert twice == pytest.approx(2 * once)


def test_persistence_round_trip(tmp_path):
    rng = random.Random(7)
    docs = _random_corpus(rng, max_docs=30)
    docs["unicode"] = ["café", "w1"]
    built = build_index(
        (DocumentRecord(d, {"title": f"t-{d}"}, t) for d, t in docs.items()), ANALYZER,
        tmp_path / "idx")
    reopened = InvertedIndex.open(tmp_path / "idx")
    assert reopened.doc_ids() == built.doc_ids()
    assert reopened.stats == built.stats
    assert reopened.document("unicode").fields == {"title": "t-unicode"}
    for _ in range(20):
        query = [f"w{rng.randrange(12)}" for _ in range(3)]
        assert reopened.bm25_search(query, 100) == built.bm25_search(query, 100)


def test_manifest_layout(tmp_path):
    _index({"d1": ["a", "b"]}, tmp_path / "idx")
    manifest = json.loads((tmp_path / "idx" / "manifest.json").read_text())
    assert manifest["format"] == "qeck-index" and manifest["version"] == 1
    assert manifest["doc_count"] == 1
    assert sorted(p.name for p in (tmp_path / "idx").iterdir()) == [
        "docs.jsonl", "manifest.json", "postings.bin", "terms.tsv"]


def test_rejects_unknown_version(tmp_path):
    _index({"d1": ["a"]}, tmp_path / "idx")
    path = tmp_path / "idx" / "manifest.json"
    manifest = json.loads(path.read_text())
    manifest["version"] = 99
    path.write_text(json.dumps(manifest))
    with pytest.raises(IndexFormatError, match="version"):
        InvertedIndex.open(tmp_path / "idx")


def test_open_missing_index(tmp_path):
    with pytest.raises(IndexFormatError):
        InvertedIndex.open(tmp_path / "nothing")


def test_overwrite_replaces_previous_index(tmp_path):
    _index({"old": ["a"]}, tmp_path / "idx")
    _index({"new": ["b"]}, tmp_path / "idx")
    assert InvertedIndex.open(tmp_path / "idx").doc_ids() == ["new"]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["idx"]


def test_refuses_to_clobber_foreign_directory(tmp_path):
    target = tmp_path / "data"
    target.mkdir()
    (target / "keep.txt").write_text("important")
    index = InvertedIndex.create(target, ANALYZER)
    index.add_document(DocumentRecord("d1", {}, ["a"]))
    with pytest.raises(IndexStoreError):
        index.commit()
    assert not index.committed
    assert (target / "keep.txt").read_text() == "important"


def test_failed_commit_keeps_previous_index(tmp_path, monkeypatch):
    _index({"old": ["a"]}, tmp_path / "idx")
    index = InvertedIndex.create(tmp_path / "idx", ANALYZER)
    index.add_document(DocumentRecord("new", {}, ["b"]))

    def boom(*args, **kwargs):
        raise OSError("disk full")

    monkeypatch.setattr("qeck.index.json.dump", boom)
    with pytest.raises(OSError):
        index.commit()
    monkeypatch.undo()
    assert InvertedIndex.open(tmp_path / "idx").doc_ids() == ["old"]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["idx"]


corpora = st.dictionaries(
    st.text(alphabet="abcdef", min_size=1, max_size=4),
    st.lists(st.sampled_from(["x", "y", "z", "u", "v"]), max_size=6),
    max_size=12,
)


@settings(max_examples=150, deadline=None)
@given(corpora, st.lists(st.sampled_from(["x", "y", "z", "q"]), min_size=1, max_size=3))
def test_search_invariants(docs, query):
    index = _index(docs)
    hits = index.bm25_search(query, 100)
    assert [h.rank for h in hits] == list(range(1, len(hits) + 1))
    assert all(h.score > 0 for h in hits)
    assert all(a.score >= b.score for a, b in zip(hits, hits[1:]))
    for term in set(query):
        assert index.document_frequency(term) == sum(
            1 for d in docs if index.term_frequency(term, d) >= 1)
    lengths = [len(t) for t in docs.values()]
    assert index.stats.avg_doc_length == (sum(lengths) / len(lengths) if lengths else 0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 5), st.integers(1, 5))
def test_score_monotone_in_tf(base_tf, extra):
    # more occurrences of the query term in a doc of the same length scores higher
    filler = ["f"] * 10
    low = ["x"] * base_tf + filler[base_tf:]
    high = ["x"] * min(base_tf + extra, 10) + filler[min(base_tf + extra, 10):]
    index = _index({"low": low, "high": high, "other": ["g"] * 10})
    scores = {h.doc_id: h.score for h in index.bm25_search(["x"], 3)}
    assert scores.get("high", 0.0) > scores.get("low", 0.0)
