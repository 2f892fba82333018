import numpy as np
import pytest

from tgc import checks
from tgc.config import Config
from tgc.errors import MissingModality, ShapeMismatch
from tgc.graph import build_graph
from tgc.model import DocInput, Model

from conftest import TINY

MODS = (("image", 3),)


def doc(ids, mods=None, label=0, cfg=TINY):
    return DocInput(build_graph(ids, cfg.graph_config()), np.asarray(ids), mods or {}, label)


def image(v):
    return {"image": np.asarray(v, dtype=np.float32).reshape(1, -1)}


@pytest.mark.parametrize("kind", ["gat", "gcn", "sage", "nn4g"])
@pytest.mark.parametrize("mode", ["full", "gnn-only", "mmc-only"])
def test_forward_is_a_distribution(kind, mode):
    cfg = TINY.with_(layer_kind=kind, mode=mode)
    m = Model.build(cfg, 10, 3, MODS)
    probs, _ = m.forward(doc([1, 2, 3, 2, 4], image([0.5, -1, 2])))
    assert probs.shape == (1, 3)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_param_names():
    m = Model.build(TINY.with_(layer_kind="sage", sage_aggregator="pooling"), 10, 2, MODS)
    assert set(m.params) == {
        "embed", "layer0.W", "layer0.W_pool", "layer1.W", "layer1.W_pool",
        "mod.image.W", "mod.image.b", "cls.W", "cls.b",
    }
    assert all(p.dtype == np.float32 for p in m.params.values())
    assert Model.build(TINY.with_(mode="gnn-only"), 10, 2, MODS).params["cls.W"].shape == (4, 2)
    assert "layer0.W" not in Model.build(TINY.with_(mode="mmc-only"), 10, 2, MODS).params


def test_full_without_modalities_equals_gnn_only():
    d = doc([1, 2, 3, 1])
    full = Model.build(TINY, 10, 2)
    gnn = Model.build(TINY.with_(mode="gnn-only"), 10, 2)
    np.testing.assert_array_equal(full.predict_proba(d), gnn.predict_proba(d))


def test_mmc_only_ignores_token_order():
    m = Model.build(TINY.with_(mode="mmc-only"), 10, 2, MODS)
    a = m.predict_proba(doc([1, 2, 3, 2, 5], image([1, 2, 3])))
    b = m.predict_proba(doc([5, 2, 2, 3, 1], image([1, 2, 3])))
    np.testing.assert_array_equal(a, b)


def test_missing_and_misshapen_modality():
    m = Model.build(TINY, 10, 2, MODS)
    with pytest.raises(MissingModality):
        m.forward(doc([1, 2]))
    with pytest.raises(ShapeMismatch):
        m.forward(doc([1, 2], image([1, 2])))
    # gnn-only never looks at modalities
    Model.build(TINY.with_(mode="gnn-only"), 10, 2, MODS).forward(doc([1, 2]))


def test_inference_is_deterministic_for_sampling_layers():
    m = Model.build(TINY.with_(layer_kind="sage", sample_size=1), 10, 2, MODS)
    d = doc([1, 2, 3, 4, 1, 3, 2], image([1, 0, 0]))
    np.testing.assert_array_equal(m.predict_proba(d), m.predict_proba(d))


@pytest.mark.parametrize("mode", checks.MODES)
def test_gradcheck_per_mode(mode):
    for kind, agg in checks.VARIANTS:
        r = checks.check_variant(Config(), kind, agg, mode, seed=0)
        assert r.max_error < 1e-4, r.label


def test_corrupted_gradient_is_detected():
    r = checks.check_variant(Config(), "gcn", "mean", "full", seed=0, corrupt="layer1.W")
    assert r.worst_param == "layer1.W"
    assert r.max_error == pytest.approx(1 / 3, abs=1e-3)


def test_random_instance_is_reproducible():
    cfg = checks.small_config(Config(), "gat", "mean", "full")
    m1, d1, s1 = checks.random_instance(cfg, 1)
    m2, d2, s2 = checks.random_instance(cfg, 1)
    assert s1 == s2 and (d1.ids == d2.ids).all()
    assert all((m1.params[k] == m2.params[k]).all() for k in m1.params)
    assert 3 <= d1.graph.n_nodes <= 5
