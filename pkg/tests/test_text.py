import pytest
from hypothesis import given, settings, strategies as st

from conftest import DATA
from qeck.porter import stem
from qeck.text import (AnalyzerConfig, analyze, default_stopwords, load_stopwords,
                       remove_stopwords, tokenize)

DEFAULT = AnalyzerConfig()
DIGITS = AnalyzerConfig(keep_digits=True)


def _porter_vocabulary():
    words = (DATA / "porter" / "voc.txt").read_text().split()
    stems = (DATA / "porter" / "output.txt").read_text().split()
    assert len(words) == len(stems)
    return dict(zip(words, stems))


PORTER = _porter_vocabulary()


@pytest.mark.parametrize("text, expected", [
    ("MediaRecorder", ["media", "recorder"]),
    ("", []),
    ("XMLParser", ["xml", "parser"]),
    ("getX509Certificate", ["get", "certificate"]),
    ("HTTPServer2Go", ["http", "server", "go"]),
    ("parse_json-response", ["parse", "json", "response"]),
    ("iPhone", ["phone"]),
    ("ALLCAPS", ["allcaps"]),
    ("setDrawingCacheEnabled(true);", ["set", "drawing", "cache", "enabled", "true"]),
    ("a b c", []),
])
def test_tokenize_golden(text, expected):
    assert tokenize(text, DEFAULT) == expected


def test_tokenize_keep_digits():
    assert tokenize("getX509Certificate", DIGITS) == ["get", "x509", "certificate"]
    assert tokenize("mp3 file", DIGITS) == ["mp3", "file"]
    assert tokenize("mp3 file", DEFAULT) == ["mp", "file"]


def test_tokenize_min_length():
    assert tokenize("a ab abc", AnalyzerConfig(min_token_length=3)) == ["abc"]
    assert tokenize("a ab", AnalyzerConfig(min_token_length=1)) == ["a", "ab"]
    with pytest.raises(ValueError):
        AnalyzerConfig(min_token_length=0)


def test_remove_stopwords_custom_list():
    config = AnalyzerConfig(stopwords=frozenset({"a", "in", "the"}))
    tokens = ["take", "a", "screenshot", "in", "android"]
    assert remove_stopwords(tokens, config) == ["take", "screenshot", "android"]
    assert remove_stopwords([], config) == []
    assert remove_stopwords(["the", "the", "the"], config) == []


def test_default_stopwords_is_smart_list():
    words = default_stopwords()
    assert len(words) == 570
    assert {"a", "in", "the", "take", "get"} <= words
    assert "screenshot" not in words and "android" not in words
    assert remove_stopwords(["take", "a", "screenshot", "in", "android"], DEFAULT) == [
        "screenshot", "android"]


def test_load_stopwords_file(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("# comment\nFoo\n\n bar \n")
    assert load_stopwords(path) == frozenset({"foo", "bar"})
    config = AnalyzerConfig.from_file(path)
    assert analyze("foo bar screenshots", config) == ["screenshot"]


def test_porter_reference_vocabulary():
    mismatches = [(w, stem(w), s) for w, s in PORTER.items() if stem(w) != s]
    assert len(PORTER) == 23531
    assert mismatches == []


@pytest.mark.parametrize("word", ["screen", "running", "connected", "drawing"])
def test_stem_examples_against_reference(word):
    assert stem(word) == PORTER[word]


@pytest.mark.parametrize("word, expected", [
    # ivity -> ive (step 2), then -ive dropped with m > 1 (step 4)
    ("connectivity", "connect"),
    # -s, ization -> ize, alize -> al, then -al dropped
    ("generalizations", "gener"),
    ("screenshot", "screenshot"),
])
def test_stem_hand_derived(word, expected):
    assert word not in PORTER
    assert stem(word) == expected


def test_stem_short_words_unchanged():
    assert stem("a") == "a" and stem("is") == "is"


def test_analyze_examples():
    # tokenize -> ["take","screenshot","in","android"]; SMART drops "take" and "in"
    assert analyze("take a screenshot in Android", DEFAULT) == ["screenshot", "android"]
    custom = AnalyzerConfig(stopwords=frozenset({"a", "in"}))
    assert analyze("take a screenshot in Android", custom) == [
        stem("take"), stem("screenshot"), stem("android")]
    assert analyze("", DEFAULT) == []
    assert analyze("getDrawingCache", DEFAULT) == ["draw", "cach"]


def test_fingerprint_tracks_configuration():
    assert AnalyzerConfig().fingerprint == DEFAULT.fingerprint
    assert DIGITS.fingerprint != DEFAULT.fingerprint
    assert AnalyzerConfig(stopwords=frozenset({"a"})).fingerprint != DEFAULT.fingerprint
    restored = AnalyzerConfig.from_dict(DEFAULT.to_dict())
    assert restored == DEFAULT and restored.fingerprint == DEFAULT.fingerprint


text_strategy = st.text(
    alphabet=st.sampled_from("abcXYZ019 _-.(){}ThEqUiCkBrOwN"), max_size=60)


@settings(max_examples=300, deadline=None)
@given(text_strategy, st.booleans(), st.integers(1, 4))
def test_analyze_is_composition(text, keep_digits, min_len):
    config = AnalyzerConfig(keep_digits=keep_digits, min_token_length=min_len)
    expected = [stem(t) for t in remove_stopwords(tokenize(text, config), config)]
    assert analyze(text, config) == expected
    assert analyze(text, config) == analyze(text, config)


@settings(max_examples=300, deadline=None)
@given(text_strategy, st.booleans())
def test_tokens_are_lowercase_alphanumeric(text, keep_digits):
    config = AnalyzerConfig(keep_digits=keep_digits)
    for token in tokenize(text, config):
        assert token == token.lower()
        assert len(token) >= config.min_token_length
        assert token.isalnum() if keep_digits else token.isalpha()


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(["a", "in", "take", "screenshot", "view", "the"]), max_size=12))
def test_remove_stopwords_keeps_order(tokens):
    config = AnalyzerConfig(stopwords=frozenset({"a", "in", "the"}))
    kept = remove_stopwords(tokens, config)
    assert kept == [t for t in tokens if t not in {"a", "in", "the"}]
