"""Loss, momentum SGD, learning-rate decay, the epoch loop and checkpoints."""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import Config
from .errors import (
    BadMagic,
    CorruptTensor,
    EmptyDataset,
    IoError,
    LabelOutOfRange,
    NonFiniteLoss,
    ShapeMismatch,
    VersionMismatch,
)
from .fusion import predict_label
from .model import DocInput, Model

MAGIC = b"TGCM"
FORMAT_VERSION = 1
PROB_FLOOR = 1e-12


def cross_entropy(probs: np.ndarray, labels: Sequence[int]) -> float:
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (probs.shape[0],):
        raise ShapeMismatch(f"{len(labels)} labels for {probs.shape[0]} rows")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise LabelOutOfRange(f"labels must be in [0, {probs.shape[1]})")
    p_true = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(p_true, PROB_FLOOR))))


def sgd_step(params: dict, grads: dict, velocity: dict, lr: float, momentum: float) -> None:
    """In place: v <- momentum * v + g; theta <- theta - lr * v; then zero g."""
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeMismatch(f"grad {name}: {g.shape} vs {theta.shape}")
        v = velocity.setdefault(name, np.zeros(theta.shape, dtype=np.float64))
        v *= momentum
        v += g
        theta -= (lr * v).astype(theta.dtype)
        g.fill(0.0)


def lr_at(epoch: int, cfg: Config) -> float:
    return cfg.lr0 * cfg.decay**epoch


def forward_document(doc: DocInput, model: Model) -> np.ndarray:
    """Class probabilities for one document under the model's mode."""
    return model.predict_proba(doc)


def predict(model: Model, docs: Sequence[DocInput]) -> list[int]:
    return [predict_label(model.predict_proba(d)) for d in docs]


def train_epoch(
    dataset: Sequence[DocInput],
    model: Model,
    cfg: Config,
    epoch: int,
    velocity: dict | None = None,
) -> float:
    """One pass over shuffled mini-batches. Returns the mean batch loss.

    ``velocity`` carries momentum buffers between epochs; pass the same dict
    every epoch.
    """
    if not dataset:
        raise EmptyDataset("no documents to train on")
    velocity = {} if velocity is None else velocity
    order = np.random.default_rng(cfg.seed ^ epoch).permutation(len(dataset))
    sample_rng = np.random.default_rng([cfg.seed, epoch])
    lr = lr_at(epoch, cfg)
    grads = model.zero_grads()
    batch_losses = []
    # overflow surfaces as NonFiniteLoss below, not as warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            scale = 1.0 / len(batch)
            total = 0.0
            for i in batch:
                loss, _, g = model.loss_and_grads(dataset[i], sample_rng, scale)
                total += loss
                for name, val in g.items():
                    grads[name] += val
            batch_loss = total / len(batch)
            if not np.isfinite(batch_loss):
                raise NonFiniteLoss(f"non-finite loss in epoch {epoch}")
            sgd_step(model.params, grads, velocity, lr, cfg.momentum)
            for name, val in model.params.items():
                if not np.all(np.isfinite(val)):
                    raise NonFiniteLoss(f"parameter {name} became non-finite in epoch {epoch}")
            batch_losses.append(batch_loss)
    return float(np.mean(batch_losses))


def fit(
    dataset: Sequence[DocInput],
    model: Model,
    cfg: Config | None = None,
    on_epoch: Callable[[int, float], None] | None = None,
) -> list[float]:
    cfg = cfg or model.cfg
    velocity: dict = {}
    losses = []
    for epoch in range(cfg.epochs):
        loss = train_epoch(dataset, model, cfg, epoch, velocity)
        losses.append(loss)
        if on_epoch:
            on_epoch(epoch, loss)
    return losses


# -- checkpoints --------------------------------------------------------------


def _u32(n: int) -> bytes:
    return struct.pack("<I", n)


def save_checkpoint(model: Model, path: str | Path, meta: dict | None = None) -> None:
    """Binary checkpoint; ``meta`` (vocabulary, label names...) rides in the snapshot."""
    snapshot = {
        "config": model.cfg.to_dict(),
        "vocab_size": model.vocab_size,
        "n_classes": model.n_classes,
        "modalities": [list(m) for m in model.modalities],
        "meta": meta or {},
    }
    blob = json.dumps(snapshot, sort_keys=True).encode("utf-8")
    out = [MAGIC, _u32(FORMAT_VERSION), _u32(len(blob)), blob, _u32(len(model.params))]
    for name, arr in model.params.items():
        raw = name.encode("utf-8")
        out += [_u32(len(raw)), raw, _u32(arr.ndim), *(_u32(d) for d in arr.shape)]
        out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    try:
        Path(path).write_bytes(b"".join(out))
    except OSError as exc:
        raise IoError(f"cannot write checkpoint {path}: {exc}") from None


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptTensor(f"checkpoint truncated while reading {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def load_checkpoint(path: str | Path) -> tuple[Model, dict]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read checkpoint {path}: {exc}") from None
    if data[:4] != MAGIC:
        raise BadMagic(f"{path} is not a model checkpoint")
    r = _Reader(data)
    r.take(4, "magic")
    version = r.u32("version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint format {version}, expected {FORMAT_VERSION}")
    try:
        snapshot = json.loads(r.take(r.u32("snapshot length"), "snapshot").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptTensor(f"unreadable config snapshot: {exc}") from None
    params = {}
    for _ in range(r.u32("tensor count")):
        name = r.take(r.u32("name length"), "name").decode("utf-8")
        shape = tuple(r.u32("dim") for _ in range(r.u32("rank")))
        count = int(np.prod(shape, dtype=np.int64))
        raw = r.take(4 * count, f"tensor {name}")
        params[name] = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)
    if r.pos != len(data):
        raise CorruptTensor("trailing bytes after the last tensor")
    model = Model(
        cfg=Config.from_dict(snapshot["config"]),
        vocab_size=snapshot["vocab_size"],
        n_classes=snapshot["n_classes"],
        modalities=tuple((n, int(d)) for n, d in snapshot["modalities"]),
        params=params,
    )
    expected = Model.build(model.cfg, model.vocab_size, model.n_classes, model.modalities)
    for name, arr in expected.params.items():
        if name not in params or params[name].shape != arr.shape:
            raise CorruptTensor(f"tensor {name} missing or has the wrong shape")
    return model, snapshot["meta"]
