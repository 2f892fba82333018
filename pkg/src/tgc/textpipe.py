"""Raw text -> cleaned, tokenized, stopword-filtered, stemmed token ids."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyCorpus

UNK_ID = 0
UNK_TOKEN = "<unk>"

_TAG = re.compile(r"<[^>]*>")
_INVALID = re.compile(r"[^a-z0-9'\s]")
_SPACE = re.compile(r"\s+")
_VOWELS = frozenset("aeiou")

# 50 common English function words.
DEFAULT_STOPWORDS = frozenset(
    """
    a an the and or but if of at by for with about against between into
    through to from in out on off over under then once here there when where
    why how all any both each few more most other some such no nor not
    so than too very
    """.split()
)


@dataclass(frozen=True)
class Document:
    id: str
    raw_text: str
    label: int = 0
    modality_refs: tuple = ()


def clean(raw: str) -> str:
    text = _TAG.sub(" ", raw.lower())
    text = _INVALID.sub(" ", text)
    return _SPACE.sub(" ", text).strip()


def tokenize(cleaned: str) -> list[str]:
    return cleaned.split()


def remove_stopwords(tokens: Iterable[str], stoplist: Iterable[str]) -> list[str]:
    stop = stoplist if isinstance(stoplist, (set, frozenset)) else frozenset(stoplist)
    return [t for t in tokens if t not in stop]


def _strip_suffix(token: str, suffix: str) -> str | None:
    stem = token[: -len(suffix)]
    if not any(ch in _VOWELS for ch in stem):
        return None
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1].isalpha() and stem[-1] not in _VOWELS:
        stem = stem[:-1]
    return stem


def stem(token: str) -> str:
    """Single-pass suffix stripper; the first matching rule wins.

    Rules in order: ``sses -> ss``, ``ies -> i``, drop a trailing ``s``
    (not ``ss``), drop ``ing`` / ``ed`` when the remainder has a vowel and
    then undouble a trailing double consonant.
    """
    if token.endswith("sses"):
        return token[:-2]
    if token.endswith("ies"):
        return token[:-2]
    if token.endswith("s") and not token.endswith("ss"):
        return token[:-1] if len(token) > 1 else token
    for suffix in ("ing", "ed"):
        if token.endswith(suffix):
            stripped = _strip_suffix(token, suffix)
            return token if stripped is None else stripped
    return token


def preprocess(raw: str, stoplist: Iterable[str] = DEFAULT_STOPWORDS) -> list[str]:
    tokens = remove_stopwords(tokenize(clean(raw)), stoplist)
    return [stem(t) for t in tokens]


def load_stopwords(path: str | Path) -> frozenset[str]:
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            words.add(line)
    return frozenset(words)


@dataclass(frozen=True)
class Vocabulary:
    """Token <-> id map. Id 0 is reserved for unknown tokens."""

    id_to_token: tuple[str, ...] = (UNK_TOKEN,)
    doc_freq: dict = field(default_factory=dict)
    total_docs: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {t: i for i, t in enumerate(self.id_to_token) if i != UNK_ID}
        )

    def __len__(self) -> int:
        """Number of real tokens (excluding UNK)."""
        return len(self.id_to_token) - 1

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def token_to_id(self) -> dict[str, int]:
        return dict(self._index)

    def id_of(self, token: str) -> int:
        return self._index.get(token, UNK_ID)


def build_vocab(
    corpus: Iterable[Document | str | Sequence[str]],
    min_count: int = 1,
    stoplist: Iterable[str] = DEFAULT_STOPWORDS,
) -> Vocabulary:
    """Assign ids by descending document frequency, ties lexicographic.

    Items may be Documents, raw strings, or already-preprocessed token lists.
    """
    stoplist = frozenset(stoplist)
    df: Counter = Counter()
    total = 0
    for item in corpus:
        if isinstance(item, Document):
            tokens = preprocess(item.raw_text, stoplist)
        elif isinstance(item, str):
            tokens = preprocess(item, stoplist)
        else:
            tokens = list(item)
        total += 1
        df.update(set(tokens))
    if not df:
        raise EmptyCorpus("no document has any token after preprocessing")
    kept = sorted((t for t, c in df.items() if c >= min_count), key=lambda t: (-df[t], t))
    return Vocabulary(
        id_to_token=(UNK_TOKEN, *kept),
        doc_freq={t: df[t] for t in kept},
        total_docs=total,
    )


def encode(tokens: Iterable[str], vocab: Vocabulary) -> list[int]:
    return [vocab.id_of(t) for t in tokens]
