"""Small numeric kernel on top of numpy arrays.

Tensors are plain ``np.ndarray`` values. Training stores float32; every
reduction accumulates in float64 and is cast back to the input precision,
so the float64 gradient-check path runs through the same code.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import EmptyInput, NonFiniteLoss, ShapeMismatch

DEFAULT_SLOPE = 0.2


@dataclass(frozen=True, eq=False)
class CSR:
    """Compressed sparse row matrix. Column indices are sorted within each row."""

    shape: tuple[int, int]
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.float64)
        out[self.row_ids(), self.indices] = self.data
        return out

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def transpose(self) -> "CSR":
        rows = self.row_ids()
        order = np.lexsort((rows, self.indices))
        indptr = np.zeros(self.shape[1] + 1, dtype=np.int64)
        np.add.at(indptr, self.indices + 1, 1)
        return CSR(
            shape=(self.shape[1], self.shape[0]),
            indptr=np.cumsum(indptr),
            indices=rows[order],
            data=self.data[order],
        )

    @classmethod
    def from_dense(cls, dense) -> "CSR":
        dense = np.asarray(dense, dtype=np.float64)
        rows, cols = np.nonzero(dense)
        indptr = np.zeros(dense.shape[0] + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        return cls(
            shape=dense.shape,
            indptr=np.cumsum(indptr),
            indices=cols.astype(np.int64),
            data=dense[rows, cols],
        )

    @classmethod
    def identity(cls, n: int) -> "CSR":
        return cls((n, n), np.arange(n + 1), np.arange(n), np.ones(n))


def _out_dtype(*arrays) -> np.dtype:
    dt = np.result_type(*[a.dtype for a in arrays])
    return dt if dt in (np.float32, np.float64) else np.dtype(np.float64)


def matmul(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[0]:
        raise ShapeMismatch(f"matmul {x.shape} @ {y.shape}")
    out = x.astype(np.float64, copy=False) @ y.astype(np.float64, copy=False)
    return out.astype(_out_dtype(x, y), copy=False)


def spmm(s: CSR, x: np.ndarray) -> np.ndarray:
    """Sparse @ dense with a fixed per-row reduction order."""
    if x.ndim != 2 or s.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"spmm {s.shape} @ {x.shape}")
    out = np.zeros((s.shape[0], x.shape[1]), dtype=np.float64)
    if s.nnz:
        prod = s.data[:, None] * x[s.indices].astype(np.float64, copy=False)
        counts = np.diff(s.indptr)
        nonempty = np.flatnonzero(counts)
        out[nonempty] = np.add.reduceat(prod, s.indptr[nonempty], axis=0)
    return out.astype(_out_dtype(x), copy=False)


def leaky_relu(x: np.ndarray, slope: float = DEFAULT_SLOPE) -> np.ndarray:
    return np.where(x >= 0, x, x * slope).astype(x.dtype, copy=False)


def leaky_relu_grad(x: np.ndarray, slope: float = DEFAULT_SLOPE) -> np.ndarray:
    """Derivative w.r.t. the pre-activation; 1 at exactly zero."""
    return np.where(x >= 0, 1.0, slope).astype(x.dtype, copy=False)


def softmax_row(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction. Accepts 1-D or 2-D input."""
    x64 = np.asarray(x, dtype=np.float64)
    z = np.exp(x64 - x64.max(axis=-1, keepdims=True))
    out = z / z.sum(axis=-1, keepdims=True)
    return out.astype(_out_dtype(np.asarray(x)), copy=False)


def concat_rows(parts: Sequence[np.ndarray]) -> np.ndarray:
    if not parts:
        raise EmptyInput("concat_rows needs at least one part")
    for p in parts:
        if p.ndim != 2 or p.shape[0] != 1:
            raise ShapeMismatch(f"concat_rows expects 1xd rows, got {p.shape}")
    return np.concatenate(parts, axis=1)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))


def gradcheck_by_param(
    loss_fn: Callable[[], float],
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    eps: float = 1e-4,
) -> dict[str, float]:
    """Central-difference check of ``grads`` against ``loss_fn``.

    ``loss_fn`` takes no arguments and reads ``params``, which are perturbed
    in place (and restored). Params should be float64.
    Returns the max relative error per parameter name.
    """
    errors = {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeMismatch(f"grad {name}: {g.shape} vs param {p.shape}")
        if not p.flags.c_contiguous:
            raise ValueError(f"param {name} must be C-contiguous to perturb in place")
        numeric = np.zeros(p.shape, dtype=np.float64)
        flat = p.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up = loss_fn()
            flat[k] = orig - eps
            down = loss_fn()
            flat[k] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NonFiniteLoss(f"non-finite loss while perturbing {name}[{k}]")
            numeric.reshape(-1)[k] = (up - down) / (2 * eps)
        errors[name] = float(relative_error(g, numeric).max()) if p.size else 0.0
    return errors


def gradcheck(
    loss_fn: Callable[[], float],
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    eps: float = 1e-4,
) -> float:
    """Maximum relative error over every parameter entry (0 if none)."""
    errors = gradcheck_by_param(loss_fn, params, grads, eps)
    return max(errors.values(), default=0.0)
