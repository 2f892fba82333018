"""Finite-difference verification of the whole model on tiny random documents."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Config
from .graph import build_graph
from .model import DocInput, Model, attention_self_term_active, kink_distance
from .tensor import gradcheck_by_param

VARIANTS = (
    ("gat", "mean"),
    ("gcn", "mean"),
    ("sage", "mean"),
    ("sage", "pooling"),
    ("nn4g", "mean"),
)
MODES = ("full", "gnn-only", "mmc-only")
CHECK_MODALITIES = (("image", 4), ("meta", 2))
CHECK_VOCAB = 6
CHECK_CLASSES = 3


@dataclass
class CheckResult:
    layer_kind: str
    aggregator: str
    mode: str
    seed: int
    n_nodes: int
    max_error: float
    worst_param: str
    errors: dict

    @property
    def label(self) -> str:
        kind = self.layer_kind if self.layer_kind != "sage" else f"sage-{self.aggregator}"
        return f"{kind}/{self.mode}/seed{self.seed}"


def small_config(base: Config, layer_kind: str, aggregator: str, mode: str) -> Config:
    """Tiny widths so that every parameter entry can be perturbed quickly."""
    return base.with_(
        d_embed=4, widths=(5, 3), d_fuse=3, sample_size=2,
        layer_kind=layer_kind, sage_aggregator=aggregator, mode=mode,
        modality_dims=CHECK_MODALITIES,
    )


def random_instance(cfg: Config, seed: int, eps: float = 1e-4, max_attempts: int = 200):
    """A 3-5 node document plus a float64 model, away from activation kinks.

    Draws are repeated (deterministically, from ``seed``) until every
    activation input sits at least ``10 * eps`` from a kink, the graph has
    at least one edge, and (for GAT) the self half of each attention vector
    has a gradient that is not identically zero.
    """
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        n = int(rng.integers(3, 6))
        nodes = rng.choice(np.arange(CHECK_VOCAB + 1), size=n, replace=False)
        seq = np.concatenate([nodes, rng.choice(nodes, size=int(rng.integers(4, 10)))])
        graph = build_graph(seq.tolist(), cfg.graph_config())
        if graph.n_edges == 0:
            continue
        mods = {name: rng.normal(size=(1, dim)) for name, dim in CHECK_MODALITIES}
        doc = DocInput(graph, seq, mods, label=int(rng.integers(CHECK_CLASSES)))
        model = Model.build(
            cfg, CHECK_VOCAB, CHECK_CLASSES, CHECK_MODALITIES, seed=int(rng.integers(2**31))
        ).astype(np.float64)
        sample_seed = int(rng.integers(2**31))
        _, cache = model.forward(doc, np.random.default_rng(sample_seed))
        if kink_distance(model, cache) > 10 * eps and attention_self_term_active(model, cache):
            return model, doc, sample_seed
    raise RuntimeError(f"no kink-free instance found for seed {seed}")


def check_variant(
    base: Config, layer_kind: str, aggregator: str, mode: str, seed: int,
    eps: float = 1e-4, corrupt: str | None = None,
) -> CheckResult:
    """Gradcheck one layer kind / mode. ``corrupt`` names a gradient to double (test hook)."""
    cfg = small_config(base, layer_kind, aggregator, mode)
    model, doc, sample_seed = random_instance(cfg, seed, eps)

    def loss():
        return model.loss_and_grads(doc, np.random.default_rng(sample_seed))[0]

    _, _, grads = model.loss_and_grads(doc, np.random.default_rng(sample_seed))
    if corrupt is not None and corrupt in grads:
        grads[corrupt] = grads[corrupt] * 2.0
    errors = gradcheck_by_param(loss, model.params, grads, eps)
    worst = max(errors, key=errors.get)
    return CheckResult(layer_kind, aggregator, mode, seed, doc.graph.n_nodes, errors[worst], worst, errors)


def run_all(base: Config | None = None, seeds=(0, 1, 2), eps: float = 1e-4, corrupt: str | None = None):
    base = base or Config()
    return [
        check_variant(base, kind, agg, mode, seed, eps, corrupt)
        for seed in seeds
        for kind, agg in VARIANTS
        for mode in MODES
    ]
