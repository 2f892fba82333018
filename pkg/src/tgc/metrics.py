"""Confusion matrix and the metrics derived from it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ClassOutOfRange, EmptyMatrix, LengthMismatch


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # counts[true][pred]

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class MetricsReport:
    accuracy: float
    precision: list[float]
    recall: list[float]
    f1: list[float]
    aggregate_f1: float
    k: int


def confusion(preds: Sequence[int], labels: Sequence[int], k: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape:
        raise LengthMismatch(f"{len(preds)} predictions for {len(labels)} labels")
    for arr in (preds, labels):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise ClassOutOfRange(f"class index outside [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return ConfusionMatrix(counts)


def accuracy(m: ConfusionMatrix) -> float:
    if m.total == 0:
        raise EmptyMatrix("accuracy of an empty confusion matrix")
    return float(np.trace(m.counts) / m.total)


def precision_recall(m: ConfusionMatrix, c: int) -> tuple[float, float]:
    """One-vs-rest precision and recall; 0 when the denominator is 0."""
    if not 0 <= c < m.k:
        raise ClassOutOfRange(f"class {c} outside [0, {m.k})")
    tp = m.counts[c, c]
    predicted = m.counts[:, c].sum()
    actual = m.counts[c, :].sum()
    precision = float(tp / predicted) if predicted else 0.0
    recall = float(tp / actual) if actual else 0.0
    return precision, recall


def f1(precision: float, recall: float) -> float:
    s = precision + recall
    return 2 * precision * recall / s if s > 0 else 0.0


def aggregate_f1(m: ConfusionMatrix) -> float:
    """Binary: F1 of class 1 (the positive class). Otherwise the macro mean."""
    if m.total == 0:
        raise EmptyMatrix("F1 of an empty confusion matrix")
    if m.k == 2:
        return f1(*precision_recall(m, 1))
    return float(np.mean([f1(*precision_recall(m, c)) for c in range(m.k)]))


def report(preds: Sequence[int], labels: Sequence[int], k: int) -> MetricsReport:
    m = confusion(preds, labels, k)
    pr = [precision_recall(m, c) for c in range(k)]
    return MetricsReport(
        accuracy=accuracy(m),
        precision=[p for p, _ in pr],
        recall=[r for _, r in pr],
        f1=[f1(p, r) for p, r in pr],
        aggregate_f1=aggregate_f1(m),
        k=k,
    )
