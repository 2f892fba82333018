"""Stacked graph layers + readout + fusion + softmax head for one document."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import fusion, layers
from .config import Config
from .errors import EmptyDocument, MissingModality, ShapeMismatch
from .graph import TextGraph

F64 = np.float64
MODES = ("full", "gnn-only", "mmc-only")
LAYER_KINDS = ("gat", "gcn", "sage", "nn4g")
# Embedding rows start in U(-EMBED_INIT, EMBED_INIT). Smaller values leave the
# mean readout near zero and training at lr 0.01 stalls.
EMBED_INIT = 1.0


@dataclass(frozen=True, eq=False)
class DocInput:
    """A preprocessed document: its graph, token ids and modality rows."""

    graph: TextGraph
    ids: np.ndarray
    modalities: Mapping[str, np.ndarray] = field(default_factory=dict)
    label: int = 0


def _glorot(rng: np.random.Generator, d_in: int, d_out: int, shape=None) -> np.ndarray:
    r = np.sqrt(6.0 / (d_in + d_out)) if d_in + d_out else 0.0
    return rng.uniform(-r, r, size=shape or (d_in, d_out))


@dataclass(eq=False)
class Model:
    cfg: Config
    vocab_size: int
    n_classes: int
    modalities: tuple[tuple[str, int], ...] = ()
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def mode(self) -> str:
        return self.cfg.mode

    @property
    def uses_gnn(self) -> bool:
        return self.mode != "mmc-only"

    @property
    def uses_modalities(self) -> bool:
        return self.mode != "gnn-only"

    @property
    def d_doc(self) -> int:
        return self.cfg.widths[-1] if self.uses_gnn else self.cfg.d_embed

    @property
    def d_total(self) -> int:
        n_mod = len(self.modalities) if self.uses_modalities else 0
        return self.d_doc + n_mod * self.cfg.d_fuse

    @classmethod
    def build(cls, cfg: Config, vocab_size: int, n_classes: int, modalities=(), seed=None) -> "Model":
        """Fresh parameters drawn from ``seed`` (defaults to ``cfg.seed``)."""
        if cfg.mode not in MODES:
            raise ValueError(f"unknown mode {cfg.mode!r}")
        if cfg.layer_kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {cfg.layer_kind!r}")
        model = cls(cfg, vocab_size, n_classes, tuple((str(n), int(d)) for n, d in modalities))
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        p = model.params
        p["embed"] = rng.uniform(-EMBED_INIT, EMBED_INIT, size=(vocab_size + 1, cfg.d_embed))
        if model.uses_gnn:
            d_in, d_prev = cfg.d_embed, 0
            for k, d_out in enumerate(cfg.widths):
                pre = f"layer{k}."
                if cfg.layer_kind == "nn4g":
                    p[pre + "W_input"] = _glorot(rng, cfg.d_embed, d_out)
                    p[pre + "Theta"] = _glorot(rng, d_prev, d_out)
                else:
                    if cfg.layer_kind == "sage" and cfg.sage_aggregator == "pooling":
                        p[pre + "W_pool"] = _glorot(rng, d_in, d_in)
                    p[pre + "W"] = _glorot(rng, d_in, d_out)
                    if cfg.layer_kind == "gat":
                        p[pre + "a"] = _glorot(rng, 2 * d_out, 1, shape=(1, 2 * d_out))
                d_in = d_prev = d_out
        if model.uses_modalities:
            for name, dim in model.modalities:
                p[f"mod.{name}.W"] = _glorot(rng, dim, cfg.d_fuse)
                p[f"mod.{name}.b"] = np.zeros((1, cfg.d_fuse))
        p["cls.W"] = _glorot(rng, model.d_total, n_classes)
        p["cls.b"] = np.zeros((1, n_classes))
        for k in p:
            p[k] = np.ascontiguousarray(p[k], dtype=np.float32)
        return model

    def astype(self, dtype) -> "Model":
        params = {k: np.ascontiguousarray(v, dtype=dtype) for k, v in self.params.items()}
        return replace(self, params=params)

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros(v.shape, dtype=F64) for k, v in self.params.items()}

    # -- forward / backward ------------------------------------------------

    def _layer_forward(self, k: int, h, x, graph: TextGraph, rng):
        cfg, p, pre = self.cfg, self.params, f"layer{k}."
        kind = cfg.layer_kind
        if kind == "gcn":
            return layers.gcn_forward(graph.adj_hat, h, p[pre + "W"], cfg.slope)
        if kind == "gat":
            # adj_hat's pattern is A + I: every neighbourhood includes the node
            return layers.gat_forward(h, graph.adj_hat, p[pre + "W"], p[pre + "a"], cfg.slope)
        if kind == "sage":
            return layers.sage_forward(
                h, graph.adj, p[pre + "W"],
                aggregator=cfg.sage_aggregator, sample_size=cfg.sample_size, rng=rng,
                w_pool=p.get(pre + "W_pool"), slope=cfg.slope,
            )
        h_prev = h if k > 0 else np.zeros((x.shape[0], 0), dtype=x.dtype)
        return layers.nn4g_forward(x, h_prev, graph.adj, p[pre + "W_input"], p[pre + "Theta"], cfg.slope)

    def forward(self, doc: DocInput, rng: np.random.Generator | None = None):
        """Class probabilities (1 x K) and a cache for :meth:`backward`.

        ``rng`` drives GraphSage neighbour sampling; when omitted a generator
        seeded from the config is used so inference is reproducible.
        """
        if len(doc.ids) == 0 or doc.graph.n_nodes == 0:
            raise EmptyDocument("document has no tokens")
        p = self.params
        cache: dict = {}
        if self.uses_gnn:
            if rng is None:
                rng = np.random.default_rng(self.cfg.seed)
            x, cache["embed"] = layers.embed_forward(doc.graph.nodes, p["embed"])
            h = x
            cache["layers"] = []
            for k in range(len(self.cfg.widths)):
                h, c = self._layer_forward(k, h, x, doc.graph, rng)
                cache["layers"].append(c)
        else:
            # sorted ids: the mean is then independent of token order, bit for bit
            h, cache["embed"] = layers.embed_forward(np.sort(doc.ids), p["embed"])
        h_doc, cache["readout"] = layers.readout_mean(h)

        parts = [h_doc.astype(F64)]
        cache["mods"] = []
        if self.uses_modalities:
            for name, dim in self.modalities:
                if name not in doc.modalities:
                    raise MissingModality(f"modality {name!r} missing")
                m = np.asarray(doc.modalities[name]).reshape(1, -1)
                if m.shape[1] != dim:
                    raise ShapeMismatch(f"modality {name!r}: expected {dim} values, got {m.shape[1]}")
                out, c = fusion.transform_modality(m, p[f"mod.{name}.W"], p[f"mod.{name}.b"], self.cfg.slope)
                parts.append(out)
                cache["mods"].append(c)
        fused = fusion.fuse_concat(parts[0], parts[1:])
        probs = fusion.classify(fused, p["cls.W"], p["cls.b"])
        cache["fused"] = fused
        return probs, cache

    def backward(self, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients given d(loss)/d(logits) (1 x K)."""
        p, cfg = self.params, self.cfg
        grads: dict[str, np.ndarray] = {}
        dlogits = np.asarray(dlogits, dtype=F64).reshape(1, -1)
        fused = cache["fused"]
        grads["cls.W"] = fused.T @ dlogits
        grads["cls.b"] = dlogits.copy()
        dfused = dlogits @ p["cls.W"].astype(F64).T

        n_mod = len(cache["mods"])
        blocks = fusion.split_fused(dfused, [self.d_doc] + [cfg.d_fuse] * n_mod)
        for (name, _), c, dm in zip(self.modalities, cache["mods"], blocks[1:]):
            g = fusion.transform_modality_backward(dm, c)
            grads[f"mod.{name}.W"], grads[f"mod.{name}.b"] = g["W"], g["b"]

        dh = layers.readout_mean_backward(blocks[0], cache["readout"])
        if self.uses_gnn:
            dx_total = np.zeros((dh.shape[0], cfg.d_embed))
            for k in reversed(range(len(cfg.widths))):
                pre, c = f"layer{k}.", cache["layers"][k]
                if cfg.layer_kind == "gcn":
                    dh, g = layers.gcn_backward(dh, c)
                elif cfg.layer_kind == "gat":
                    dh, g = layers.gat_backward(dh, c)
                elif cfg.layer_kind == "sage":
                    dh, g = layers.sage_backward(dh, c)
                else:
                    dx, dh, g = layers.nn4g_backward(dh, c)
                    dx_total += dx
                for name, val in g.items():
                    grads[pre + name] = val
            if cfg.layer_kind == "nn4g":
                # dh is now the gradient w.r.t. the zero initial state
                dh = dx_total
        grads["embed"] = layers.embed_backward(dh, cache["embed"])
        return grads

    def loss_and_grads(self, doc: DocInput, rng=None, scale: float = 1.0):
        """Cross-entropy of one document and its (scaled) gradients."""
        probs, cache = self.forward(doc, rng)
        p_true = max(float(probs[0, doc.label]), 1e-12)
        dlogits = probs.astype(F64).copy()
        dlogits[0, doc.label] -= 1.0
        grads = self.backward(cache, dlogits * scale)
        return -np.log(p_true), probs, grads

    def predict_proba(self, doc: DocInput) -> np.ndarray:
        probs, _ = self.forward(doc)
        return probs.ravel()


def kink_distance(model: Model, cache) -> float:
    """Smallest distance of any activation input from a non-differentiable point.

    Covers LeakyReLU preactivations and, for max pooling, the gap between
    the winning and runner-up candidate. Finite differences are only
    meaningful when this exceeds the perturbation size.
    """
    vals = [np.abs(c[1]).min() for c in cache["mods"]]
    kind = model.cfg.layer_kind
    for c in cache.get("layers", []):
        if kind == "gcn":
            vals.append(np.abs(c[3]).min())
        elif kind == "gat":
            vals += [np.abs(c[7]).min(), np.abs(c[8]).min()]
        elif kind == "nn4g":
            vals.append(np.abs(c[5]).min())
        else:
            aggregator, _, _, _, slope, members, ptr, sizes, _, pre, extra = c
            vals.append(np.abs(pre).min())
            if aggregator == "pooling":
                q_pre = extra[0]
                vals.append(np.abs(q_pre).min())
                q = layers.leaky_relu(q_pre, slope)[members]
                for v in range(len(sizes)):
                    if sizes[v] > 1:
                        top = np.sort(q[ptr[v]:ptr[v + 1]], axis=0)
                        vals.append((top[-1] - top[-2]).min())
    return float(min(vals, default=np.inf))


def attention_self_term_active(model: Model, cache) -> bool:
    """True unless some GAT layer has every attention row on a single LeakyReLU branch.

    In that regime the node's own half of the attention vector only shifts
    each softmax row, so its gradient is identically zero.
    """
    if model.cfg.layer_kind != "gat" or not model.uses_gnn:
        return True
    for c in cache["layers"]:
        adj, pre = c[1], c[7]
        rows = adj.row_ids()
        pos = np.bincount(rows, weights=(pre >= 0), minlength=adj.shape[0])
        sizes = np.diff(adj.indptr)
        if not np.any((pos > 0) & (pos < sizes)):
            return False
    return True
