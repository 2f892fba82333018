"""Generated corpora for smoke tests, the learning check and the ablation run."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import Record, write_dataset

# Token shapes like "ka17" pass through cleaning and stemming unchanged.
TOPIC_PREFIXES = ("ka", "mo")
SHARED_PREFIX = "zu"
NEUTRAL_PREFIX = "ne"
LABELS = ("topic_a", "topic_b")


def _words(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(n)]


def separable_corpus(
    n_docs: int = 400,
    vocab_size: int = 200,
    seed: int = 42,
    n_shared: int = 10,
    shared_rate: float = 0.2,
    length=(12, 30),
) -> list[Record]:
    """Two classes with near-disjoint topic vocabularies.

    ``vocab_size`` words are split into two topic lists plus ``n_shared``
    words both classes draw from at ``shared_rate``.
    """
    rng = np.random.default_rng(seed)
    per_topic = (vocab_size - n_shared) // 2
    topics = [_words(p, per_topic) for p in TOPIC_PREFIXES]
    shared = _words(SHARED_PREFIX, n_shared)
    records = []
    for i in range(n_docs):
        label = int(rng.integers(2))
        n = int(rng.integers(length[0], length[1] + 1))
        from_shared = rng.random(n) < shared_rate
        words = [
            shared[rng.integers(n_shared)] if s else topics[label][rng.integers(per_topic)]
            for s in from_shared
        ]
        records.append(Record(f"doc{i:04d}", " ".join(words), LABELS[label]))
    return records


def multimodal_corpus(
    n_docs: int = 400,
    seed: int = 42,
    n_topic_words: int = 40,
    n_neutral: int = 30,
    image_dim: int = 8,
    split=(0.4, 0.3, 0.3),
) -> list[Record]:
    """Text and an "image" vector carry complementary class evidence.

    Each document falls in one of three groups (fractions ``split``):

    * text-only evidence: a handful of distinct topic words, each used once,
      plus one word of the *other* topic repeated many times. The class is
      readable from which words occur, while a frequency-weighted bag of
      words points the wrong way. The image vector is pure noise.
    * image-only evidence: neutral words only; the image vector is shifted
      by the class.
    * both: topic words as above and an informative image vector.
    """
    rng = np.random.default_rng(seed)
    topics = [_words(p, n_topic_words) for p in TOPIC_PREFIXES]
    neutral = _words(NEUTRAL_PREFIX, n_neutral)
    records = []
    for i in range(n_docs):
        label = int(rng.integers(2))
        group = int(rng.choice(3, p=split))
        sign = 1.0 if label == 1 else -1.0
        image = rng.normal(size=image_dim)
        if group == 1:
            words = list(rng.choice(neutral, size=int(rng.integers(8, 16))))
        else:
            own = list(rng.choice(topics[label], size=int(rng.integers(4, 7)), replace=False))
            decoy = [str(rng.choice(topics[1 - label]))] * int(rng.integers(8, 16))
            filler = list(rng.choice(neutral, size=int(rng.integers(2, 5))))
            words = own + decoy + filler
            rng.shuffle(words)
        if group != 0:
            image[0] = 2.0 * sign + 0.3 * rng.normal()
        records.append(
            Record(f"doc{i:04d}", " ".join(words), LABELS[label], {"image": [round(float(v), 6) for v in image]})
        )
    return records


def write_corpus(records, path: str | Path) -> Path:
    path = Path(path)
    write_dataset(records, path)
    return path
