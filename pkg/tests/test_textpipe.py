import pytest
from hypothesis import given, strategies as st

from tgc.errors import EmptyCorpus
from tgc.textpipe import (
    DEFAULT_STOPWORDS,
    UNK_ID,
    Document,
    build_vocab,
    clean,
    encode,
    load_stopwords,
    preprocess,
    remove_stopwords,
    stem,
    tokenize,
)


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("Hello, <b>World</b>!", "hello world"),
        ("", ""),
        ("run run run", "run run run"),
        ("  Tabs\tand\nnewlines  ", "tabs and newlines"),
        ("<p>a<br/>b</p>", "a b"),
    ],
)
def test_clean(raw, expected):
    assert clean(raw) == expected


@given(st.text())
def test_clean_is_idempotent(raw):
    once = clean(raw)
    assert clean(once) == once
    assert once == once.strip()
    assert "  " not in once


@pytest.mark.parametrize(
    "text, expected",
    [("the cat sat", ["the", "cat", "sat"]), ("", []), ("don't stop", ["don't", "stop"])],
)
def test_tokenize(text, expected):
    assert tokenize(clean(text)) == expected


def test_remove_stopwords():
    assert remove_stopwords(["the", "cat", "and", "dog"], {"the", "and"}) == ["cat", "dog"]
    assert remove_stopwords(["cat"], set()) == ["cat"]
    assert remove_stopwords(["the", "the"], {"the"}) == []


def test_default_stoplist_covers_common_function_words():
    assert {"and", "the"} <= DEFAULT_STOPWORDS
    assert len(DEFAULT_STOPWORDS) == 50


@pytest.mark.parametrize(
    "token, expected",
    [
        ("running", "run"),
        ("cats", "cat"),
        ("caress", "caress"),
        ("ponies", "poni"),
        ("caresses", "caress"),
        ("jumped", "jump"),
        ("sing", "sing"),  # no vowel before "ing"
        ("s", "s"),
        ("ran", "ran"),  # irregular forms are out of reach of suffix rules
    ],
)
def test_stem(token, expected):
    assert stem(token) == expected


def test_preprocess_pipeline():
    assert preprocess("The cats were <i>running</i>!") == ["cat", "were", "run"]


def test_load_stopwords(tmp_path):
    p = tmp_path / "stop.txt"
    p.write_text("# comment\nfoo\n\nBar  # trailing\n")
    assert load_stopwords(p) == frozenset({"foo", "bar"})


def test_vocab_by_document_frequency():
    v = build_vocab(["cat dog", "cat"], min_count=1)
    assert v.token_to_id == {"cat": 1, "dog": 2}
    assert v.id_to_token[UNK_ID] == "<unk>"
    assert len(v) == 2


def test_vocab_ties_are_lexicographic():
    v = build_vocab([["b", "a"], ["c"]])
    assert v.id_to_token[1:] == ("a", "b", "c")


def test_vocab_min_count_above_total_docs_leaves_only_unk():
    v = build_vocab(["cat dog", "cat"], min_count=3)
    assert len(v) == 0
    assert encode(["cat"], v) == [UNK_ID]


def test_doc_freq_counts_documents_not_occurrences():
    v = build_vocab([["a", "a", "a"]])
    assert v.token_to_id == {"a": 1}
    assert v.doc_freq["a"] == 1


def test_vocab_accepts_documents():
    v = build_vocab([Document("d1", "Cats and dogs", "x")])
    assert set(v.token_to_id) == {"cat", "dog"}


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        build_vocab(["the and", ""])


def test_encode():
    v = build_vocab(["cat dog", "cat"])
    assert encode(["cat", "dog"], v) == [1, 2]
    assert encode(["zebra"], build_vocab(["cat"])) == [0]
    assert encode([], v) == []
