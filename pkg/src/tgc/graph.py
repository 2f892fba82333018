"""Per-document word graphs: window co-occurrence, PPMI weights, edge pruning."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateEntry, EmptyDocument, IndexOutOfRange
from .tensor import CSR


@dataclass
class CooccurrenceStats:
    n_windows: int = 0
    pair_counts: Counter = field(default_factory=Counter)  # keyed by (min_id, max_id)
    unigram_counts: Counter = field(default_factory=Counter)

    def pair(self, i: int, j: int) -> int:
        return self.pair_counts.get((i, j) if i <= j else (j, i), 0)


@dataclass(frozen=True)
class GraphConfig:
    window_size: int = 3
    ppmi_threshold: float = 0.0
    top_k_per_node: int = 16

    def __post_init__(self):
        if self.window_size < 2:
            raise ValueError("window_size must be >= 2")
        if self.ppmi_threshold < 0:
            raise ValueError("ppmi_threshold must be >= 0")
        if self.top_k_per_node < 1:
            raise ValueError("top_k_per_node must be >= 1")


@dataclass(frozen=True, eq=False)
class TextGraph:
    nodes: np.ndarray  # distinct token ids, first-occurrence order
    adj: CSR  # symmetric PPMI weights, zero diagonal
    adj_hat: CSR  # D^-1/2 (A + I) D^-1/2

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return self.adj.nnz // 2


def cooccurrence(ids: Sequence[int], w: int) -> CooccurrenceStats:
    if w < 2:
        raise ValueError("window size must be >= 2")
    ids = list(ids)
    stats = CooccurrenceStats()
    if not ids:
        return stats
    n_windows = max(1, len(ids) - w + 1)
    for start in range(n_windows):
        distinct = sorted(set(ids[start : start + w]))
        stats.unigram_counts.update(distinct)
        stats.pair_counts.update(combinations(distinct, 2))
    stats.n_windows = n_windows
    return stats


def ppmi(stats: CooccurrenceStats, i: int, j: int) -> float:
    c_ij = stats.pair(i, j)
    if c_ij == 0:
        return 0.0
    n = stats.n_windows
    # ln(p_ij / (p_i p_j)) with p = count / n
    pmi = math.log(c_ij * n / (stats.unigram_counts[i] * stats.unigram_counts[j]))
    return max(0.0, pmi)


def to_csr(triplets: Iterable[tuple[int, int, float]], n: int) -> CSR:
    trip = list(triplets)
    seen = set()
    for r, c, _ in trip:
        if not (0 <= r < n and 0 <= c < n):
            raise IndexOutOfRange(f"entry ({r}, {c}) outside {n}x{n}")
        if (r, c) in seen:
            raise DuplicateEntry(f"duplicate entry ({r}, {c})")
        seen.add((r, c))
    trip.sort(key=lambda t: (t[0], t[1]))
    indptr = np.zeros(n + 1, dtype=np.int64)
    for r, _, _ in trip:
        indptr[r + 1] += 1
    return CSR(
        shape=(n, n),
        indptr=np.cumsum(indptr),
        indices=np.array([c for _, c, _ in trip], dtype=np.int64),
        data=np.array([v for _, _, v in trip], dtype=np.float64),
    )


def _triplets(a: CSR):
    return zip(a.row_ids().tolist(), a.indices.tolist(), a.data.tolist())


def with_self_loops(a: CSR) -> CSR:
    """A + I (assumes a zero diagonal)."""
    n = a.shape[0]
    return to_csr([*_triplets(a), *((i, i, 1.0) for i in range(n))], n)


def normalize(a: CSR) -> CSR:
    """Symmetric normalization D~^-1/2 (A + I) D~^-1/2 with d~_i = 1 + sum_j A_ij."""
    a_tilde = with_self_loops(a)
    deg = np.zeros(a.shape[0])
    np.add.at(deg, a_tilde.row_ids(), a_tilde.data)
    inv_sqrt = 1.0 / np.sqrt(deg)
    data = a_tilde.data * inv_sqrt[a_tilde.row_ids()] * inv_sqrt[a_tilde.indices]
    return CSR(a_tilde.shape, a_tilde.indptr, a_tilde.indices, data)


def laplacian(a: CSR) -> CSR:
    n = a.shape[0]
    deg = np.zeros(n)
    np.add.at(deg, a.row_ids(), a.data)
    trips = [(r, c, -v) for r, c, v in _triplets(a) if r != c]
    trips += [(i, i, float(deg[i])) for i in range(n)]
    return to_csr(trips, n)


def select_edges(
    nodes: Sequence[int], stats: CooccurrenceStats, cfg: GraphConfig
) -> dict[tuple[int, int], float]:
    """PPMI-thresholded candidates pruned to each node's top-k incident edges.

    Returns {(pos_u, pos_v): weight} with pos_u < pos_v (positions in ``nodes``).
    An edge survives if either endpoint ranks it in its own top k; ranking ties
    fall back to the neighbour's position.
    """
    pos = {tok: k for k, tok in enumerate(nodes)}
    candidates = {}
    for i, j in stats.pair_counts:
        if i not in pos or j not in pos:
            continue
        w = ppmi(stats, i, j)
        if w > cfg.ppmi_threshold:
            u, v = sorted((pos[i], pos[j]))
            candidates[(u, v)] = w
    incident: dict[int, list[tuple[float, int]]] = {}
    for (u, v), w in candidates.items():
        incident.setdefault(u, []).append((w, v))
        incident.setdefault(v, []).append((w, u))
    kept = set()
    for u, lst in incident.items():
        lst.sort(key=lambda t: (-t[0], t[1]))
        for _, v in lst[: cfg.top_k_per_node]:
            kept.add((min(u, v), max(u, v)))
    return {e: candidates[e] for e in sorted(kept)}


def graph_from_edges(nodes: Sequence[int], edges: dict[tuple[int, int], float]) -> TextGraph:
    n = len(nodes)
    trips = []
    for (u, v), w in edges.items():
        trips.append((u, v, w))
        trips.append((v, u, w))
    adj = to_csr(trips, n)
    return TextGraph(nodes=np.asarray(nodes, dtype=np.int64), adj=adj, adj_hat=normalize(adj))


def build_graph(ids: Sequence[int], cfg: GraphConfig = GraphConfig()) -> TextGraph:
    if len(ids) == 0:
        raise EmptyDocument("cannot build a graph from an empty token sequence")
    nodes = list(dict.fromkeys(int(i) for i in ids))
    stats = cooccurrence(ids, cfg.window_size)
    return graph_from_edges(nodes, select_edges(nodes, stats, cfg))
