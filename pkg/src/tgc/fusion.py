"""Modality transforms, concatenation fusion and the softmax head."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ShapeMismatch
from .tensor import DEFAULT_SLOPE, concat_rows, leaky_relu, leaky_relu_grad, matmul, softmax_row

F64 = np.float64


def transform_modality(m: np.ndarray, w: np.ndarray, b: np.ndarray, slope: float = DEFAULT_SLOPE):
    """m' = LeakyReLU(m W + b). Returns ``(out, cache)``."""
    m = np.atleast_2d(m)
    if m.shape[1] != w.shape[0] or b.shape != (1, w.shape[1]):
        raise ShapeMismatch(f"modality {m.shape} vs W {w.shape}, b {b.shape}")
    pre = matmul(m.astype(F64), w.astype(F64)) + b.astype(F64)
    return leaky_relu(pre, slope), (m, pre, slope)


def transform_modality_backward(dout: np.ndarray, cache) -> dict[str, np.ndarray]:
    m, pre, slope = cache
    dpre = dout * leaky_relu_grad(pre, slope)
    return {"W": matmul(m.astype(F64).T, dpre), "b": dpre.copy()}


def fuse_concat(h_doc: np.ndarray, modality_outputs: Sequence[np.ndarray] = ()) -> np.ndarray:
    return concat_rows([h_doc, *modality_outputs])


def split_fused(d_fused: np.ndarray, widths: Sequence[int]) -> list[np.ndarray]:
    """Backward of fuse_concat: cut the gradient row back into its blocks."""
    if sum(widths) != d_fused.shape[1]:
        raise ShapeMismatch(f"widths {list(widths)} do not cover {d_fused.shape[1]} columns")
    return np.split(d_fused, np.cumsum(widths)[:-1], axis=1)


def classify(h_fused: np.ndarray, w_cls: np.ndarray, b_cls: np.ndarray) -> np.ndarray:
    if h_fused.shape[1] != w_cls.shape[0] or b_cls.shape != (1, w_cls.shape[1]):
        raise ShapeMismatch(f"fused {h_fused.shape} vs W_cls {w_cls.shape}, b_cls {b_cls.shape}")
    logits = matmul(h_fused.astype(F64), w_cls.astype(F64)) + b_cls.astype(F64)
    return softmax_row(logits)


def predict_label(probs: np.ndarray) -> int:
    """Argmax; ties go to the lowest class index."""
    return int(np.argmax(np.asarray(probs).ravel()))
