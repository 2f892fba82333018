"""Graph layers with hand-written backward passes.

Every ``*_forward`` returns ``(out, cache)`` and the matching ``*_backward``
takes the upstream gradient plus that cache and returns the input gradient
together with a dict of parameter gradients. Internal sums run in float64;
outputs come back in the dtype of the node features.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyGraph, IndexOutOfRange, ShapeMismatch
from .tensor import CSR, DEFAULT_SLOPE, leaky_relu, leaky_relu_grad, matmul, spmm

F64 = np.float64


def _check_rows(name: str, a: np.ndarray, n: int):
    if a.ndim != 2 or a.shape[0] != n:
        raise ShapeMismatch(f"{name}: expected {n} rows, got shape {a.shape}")


def _check_inner(name: str, h: np.ndarray, w: np.ndarray):
    if h.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"{name}: features {h.shape} incompatible with weights {w.shape}")


# -- embedding --------------------------------------------------------------


def embed_forward(ids, table: np.ndarray):
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexOutOfRange(f"token id outside embedding table of {table.shape[0]} rows")
    return table[ids], (ids, table.shape)


def embed_backward(dout: np.ndarray, cache) -> np.ndarray:
    ids, shape = cache
    dtable = np.zeros(shape, dtype=F64)
    np.add.at(dtable, ids, dout)
    return dtable


# -- GCN --------------------------------------------------------------------


def gcn_forward(adj_hat: CSR, h: np.ndarray, w: np.ndarray, slope: float = DEFAULT_SLOPE):
    _check_rows("gcn", h, adj_hat.shape[0])
    _check_inner("gcn", h, w)
    ah = spmm(adj_hat, h)
    pre = matmul(ah, w)
    return leaky_relu(pre, slope), (adj_hat, ah, w, pre, slope)


def gcn_backward(dout: np.ndarray, cache):
    adj_hat, ah, w, pre, slope = cache
    dpre = dout * leaky_relu_grad(pre, slope)
    dw = matmul(ah.T, dpre)
    # adj_hat is symmetric
    dh = spmm(adj_hat, matmul(dpre, w.T))
    return dh, {"W": dw}


# -- GAT --------------------------------------------------------------------


def _segment_sum(values: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    # every segment is nonempty (self loops)
    return np.add.reduceat(values, indptr[:-1], axis=0)


def _check_self_loops(adj: CSR):
    n = adj.shape[0]
    rows = adj.row_ids()
    has_self = np.zeros(n, dtype=bool)
    has_self[rows[rows == adj.indices]] = True
    if not has_self.all():
        raise ValueError("every neighbour list must contain the node itself")


def _attention(z: np.ndarray, adj: CSR, a: np.ndarray, slope: float):
    d = z.shape[1]
    if a.shape != (1, 2 * d):
        raise ShapeMismatch(f"attention vector must be 1x{2 * d}, got {a.shape}")
    a64 = a.astype(F64).ravel()
    s_self = z @ a64[:d]
    s_nbr = z @ a64[d:]
    dst, src = adj.row_ids(), adj.indices
    pre = s_self[dst] + s_nbr[src]
    e = leaky_relu(pre, slope)
    emax = np.maximum.reduceat(e, adj.indptr[:-1])
    ex = np.exp(e - emax[dst])
    alpha = ex / _segment_sum(ex, adj.indptr)[dst]
    return alpha, pre


def gat_attention(h: np.ndarray, adj: CSR, w: np.ndarray, a: np.ndarray, slope: float = DEFAULT_SLOPE) -> CSR:
    """Attention coefficients on the sparsity pattern of ``adj`` (self loops required)."""
    _check_rows("gat", h, adj.shape[0])
    _check_inner("gat", h, w)
    _check_self_loops(adj)
    z = matmul(h.astype(F64), w.astype(F64))
    alpha, _ = _attention(z, adj, a, slope)
    return CSR(adj.shape, adj.indptr, adj.indices, alpha)


def gat_forward(h: np.ndarray, adj: CSR, w: np.ndarray, a: np.ndarray, slope: float = DEFAULT_SLOPE):
    """Single-head attention update; neighbour sets are the rows of ``adj``."""
    _check_rows("gat", h, adj.shape[0])
    _check_inner("gat", h, w)
    _check_self_loops(adj)
    z = matmul(h.astype(F64), w.astype(F64))
    alpha, pre = _attention(z, adj, a, slope)
    src = adj.indices
    m = _segment_sum(alpha[:, None] * z[src], adj.indptr)
    out = leaky_relu(m, slope).astype(h.dtype, copy=False)
    return out, (h, adj, w, a, slope, z, alpha, pre, m)


def gat_backward(dout: np.ndarray, cache):
    h, adj, w, a, slope, z, alpha, pre, m = cache
    n, d = z.shape
    dst, src = adj.row_ids(), adj.indices
    dm = dout.astype(F64) * leaky_relu_grad(m, slope)

    dz = np.zeros_like(z)
    np.add.at(dz, src, alpha[:, None] * dm[dst])
    dalpha = np.einsum("ij,ij->i", dm[dst], z[src])
    # softmax Jacobian within each neighbourhood
    de = alpha * (dalpha - _segment_sum(alpha * dalpha, adj.indptr)[dst])
    dpre = de * leaky_relu_grad(pre, slope)
    ds_self = _segment_sum(dpre, adj.indptr)
    ds_nbr = np.bincount(src, weights=dpre, minlength=n)

    a64 = a.astype(F64).ravel()
    dz += np.outer(ds_self, a64[:d]) + np.outer(ds_nbr, a64[d:])
    da = np.concatenate([z.T @ ds_self, z.T @ ds_nbr])[None, :]
    dw = matmul(h.astype(F64).T, dz)
    dh = matmul(dz, w.astype(F64).T)
    return dh, {"W": dw, "a": da}


# -- GraphSage --------------------------------------------------------------


def sample_neighbors(adj: CSR, sample_size: int, rng: np.random.Generator | None = None) -> list[np.ndarray]:
    """Uniform sample without replacement of min(s, degree) neighbours per node.

    Self loops in ``adj`` are ignored. When s >= degree the whole (sorted)
    neighbourhood is returned and ``rng`` is not consulted.
    """
    if sample_size < 1:
        raise ValueError("sample_size must be >= 1")
    out = []
    for v in range(adj.shape[0]):
        nbrs, _ = adj.row(v)
        nbrs = np.sort(nbrs[nbrs != v])
        if len(nbrs) > sample_size:
            if rng is None:
                raise ValueError("an rng is required when sampling is active")
            nbrs = np.sort(rng.choice(nbrs, size=sample_size, replace=False))
        out.append(nbrs)
    return out


def _groups(samples: list[np.ndarray]):
    members = np.concatenate([np.concatenate([[v], s]) for v, s in enumerate(samples)]).astype(np.int64)
    sizes = np.array([1 + len(s) for s in samples], dtype=np.int64)
    ptr = np.concatenate([[0], np.cumsum(sizes)])
    return members, ptr, sizes


def sage_forward(
    h: np.ndarray,
    adj: CSR,
    w: np.ndarray,
    *,
    aggregator: str = "mean",
    sample_size: int = 10,
    rng: np.random.Generator | None = None,
    w_pool: np.ndarray | None = None,
    slope: float = DEFAULT_SLOPE,
):
    """GraphSage update over {v} plus a sampled neighbourhood."""
    n = adj.shape[0]
    _check_rows("sage", h, n)
    _check_inner("sage", h, w)
    samples = sample_neighbors(adj, sample_size, rng)
    members, ptr, sizes = _groups(samples)
    h64 = h.astype(F64)
    if aggregator == "mean":
        z = np.add.reduceat(h64[members], ptr[:-1], axis=0) / sizes[:, None]
        extra = None
    elif aggregator == "pooling":
        if w_pool is None or w_pool.shape != (h.shape[1], h.shape[1]):
            raise ShapeMismatch("pooling aggregator needs a square W_pool over the input width")
        q_pre = matmul(h64, w_pool.astype(F64))
        q = leaky_relu(q_pre, slope)
        gathered = q[members]
        z = np.maximum.reduceat(gathered, ptr[:-1], axis=0)
        # first member attaining the max, per node and column
        hit = gathered == np.repeat(z, sizes, axis=0)
        pos = np.arange(len(members))[:, None]
        first = np.minimum.reduceat(np.where(hit, pos, len(members)), ptr[:-1], axis=0)
        extra = (q_pre, members[first])
    else:
        raise ValueError(f"unknown aggregator {aggregator!r}")
    pre = matmul(z, w.astype(F64))
    out = leaky_relu(pre, slope).astype(h.dtype, copy=False)
    return out, (aggregator, h64, w, w_pool, slope, members, ptr, sizes, z, pre, extra)


def sage_backward(dout: np.ndarray, cache):
    aggregator, h64, w, w_pool, slope, members, ptr, sizes, z, pre, extra = cache
    dpre = dout.astype(F64) * leaky_relu_grad(pre, slope)
    grads = {"W": matmul(z.T, dpre)}
    dz = matmul(dpre, w.astype(F64).T)
    dh = np.zeros_like(h64)
    if aggregator == "mean":
        np.add.at(dh, members, np.repeat(dz / sizes[:, None], sizes, axis=0))
    else:
        q_pre, argmax = extra
        dq = np.zeros_like(q_pre)
        cols = np.broadcast_to(np.arange(dz.shape[1]), dz.shape)
        np.add.at(dq, (argmax, cols), dz)
        dq_pre = dq * leaky_relu_grad(q_pre, slope)
        grads["W_pool"] = matmul(h64.T, dq_pre)
        dh += matmul(dq_pre, w_pool.astype(F64).T)
    return dh, grads


# -- NN4G -------------------------------------------------------------------


def nn4g_forward(
    x: np.ndarray,
    h_prev: np.ndarray,
    adj: CSR,
    w_input: np.ndarray,
    theta: np.ndarray,
    slope: float = DEFAULT_SLOPE,
):
    """f(x_v W_input + (sum_u A_vu h_u) Theta) with the raw adjacency A."""
    n = adj.shape[0]
    _check_rows("nn4g input", x, n)
    _check_rows("nn4g hidden", h_prev, n)
    _check_inner("nn4g input", x, w_input)
    _check_inner("nn4g hidden", h_prev, theta)
    if w_input.shape[1] != theta.shape[1]:
        raise ShapeMismatch("W_input and Theta must share the output width")
    agg = spmm(adj, h_prev.astype(F64))
    pre = matmul(x.astype(F64), w_input.astype(F64)) + matmul(agg, theta.astype(F64))
    out = leaky_relu(pre, slope).astype(x.dtype, copy=False)
    return out, (x, agg, adj, w_input, theta, pre, slope)


def nn4g_backward(dout: np.ndarray, cache):
    """Returns (dx, dh_prev, grads)."""
    x, agg, adj, w_input, theta, pre, slope = cache
    dpre = dout.astype(F64) * leaky_relu_grad(pre, slope)
    grads = {
        "W_input": matmul(x.astype(F64).T, dpre),
        "Theta": matmul(agg.T, dpre),
    }
    dx = matmul(dpre, w_input.astype(F64).T)
    # adj is symmetric
    dh_prev = spmm(adj, matmul(dpre, theta.astype(F64).T))
    return dx, dh_prev, grads


# -- readout ----------------------------------------------------------------


def readout_mean(h: np.ndarray):
    if h.shape[0] == 0:
        raise EmptyGraph("readout over a graph with no nodes")
    out = h.astype(F64).mean(axis=0, keepdims=True).astype(h.dtype, copy=False)
    return out, h.shape[0]


def readout_mean_backward(dout: np.ndarray, cache) -> np.ndarray:
    n = cache
    return np.repeat(dout.astype(F64) / n, n, axis=0)
