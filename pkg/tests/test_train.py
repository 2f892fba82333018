import math

import numpy as np
import pytest

from tgc.config import Config
from tgc.data import prepare
from tgc.errors import BadMagic, CorruptTensor, EmptyDataset, IoError, LabelOutOfRange, VersionMismatch
from tgc.model import Model
from tgc.synthetic import separable_corpus
from tgc.train import (
    cross_entropy,
    fit,
    load_checkpoint,
    lr_at,
    predict,
    save_checkpoint,
    sgd_step,
    train_epoch,
)

from conftest import TINY


def test_cross_entropy():
    assert cross_entropy(np.array([[0.0, 1.0]]), [1]) == 0.0
    assert cross_entropy(np.array([[0.5, 0.5]]), [0]) == pytest.approx(math.log(2))
    assert cross_entropy(np.array([[0.0, 1.0], [0.5, 0.5]]), [1, 0]) == pytest.approx(math.log(2) / 2)
    assert cross_entropy(np.array([[1.0, 0.0]]), [1]) == pytest.approx(-math.log(1e-12))
    with pytest.raises(LabelOutOfRange):
        cross_entropy(np.array([[0.5, 0.5]]), [2])


def step(theta, g, lr, mu, v=None):
    params, grads = {"t": np.array([theta])}, {"t": np.array([g])}
    v = {} if v is None else v
    sgd_step(params, grads, v, lr, mu)
    return params["t"][0], v


def test_sgd_step():
    assert step(1.0, 2.0, 0.1, 0.0)[0] == pytest.approx(0.8)
    assert step(1.0, 0.0, 0.1, 0.9)[0] == 1.0
    theta, v = step(0.0, 1.0, 1.0, 0.9)
    theta, _ = step(theta, 1.0, 1.0, 0.9, v)
    assert theta == pytest.approx(-2.9)


def test_sgd_step_zeroes_gradients():
    grads = {"t": np.array([1.0])}
    sgd_step({"t": np.array([0.0])}, grads, {}, 0.1, 0.5)
    assert grads["t"][0] == 0.0


def test_lr_schedule():
    cfg = Config()
    assert lr_at(0, cfg) == 0.01
    assert lr_at(2, cfg) == pytest.approx(0.009025)
    assert lr_at(7, cfg.with_(decay=1.0)) == 0.01


@pytest.fixture
def sep():
    records = separable_corpus(n_docs=40, vocab_size=40, seed=1)
    return prepare(records, TINY)


def test_zero_lr_epoch_leaves_params(sep):
    cfg = TINY.with_(lr0=0.0)
    model = Model.build(cfg, len(sep.vocab), 2)
    before = {k: v.copy() for k, v in model.params.items()}
    one = sep.docs[:1]
    expected = cross_entropy(model.predict_proba(one[0])[None], [one[0].label])
    loss = train_epoch(one, model, cfg, 0)
    assert loss == pytest.approx(expected, rel=1e-6)
    assert all((before[k] == model.params[k]).all() for k in before)


def test_training_is_bit_reproducible(sep):
    runs = []
    for _ in range(2):
        model = Model.build(TINY.with_(layer_kind="sage", sample_size=2), len(sep.vocab), 2)
        runs.append(fit(sep.docs, model))
    assert runs[0] == runs[1]


def test_loss_decreases_on_separable_corpus():
    prep = prepare(separable_corpus(), Config())
    model = Model.build(Config(), len(prep.vocab), 2)
    losses = fit(prep.docs, model, Config(epochs=5))
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_empty_dataset():
    with pytest.raises(EmptyDataset):
        train_epoch([], Model.build(TINY, 3, 2), TINY, 0)


def test_checkpoint_round_trip(tmp_path, sep):
    model = Model.build(TINY, len(sep.vocab), 2)
    fit(sep.docs[:8], model)
    path = tmp_path / "m.bin"
    save_checkpoint(model, path, {"labels": ["a", "b"]})
    loaded, meta = load_checkpoint(path)
    assert meta == {"labels": ["a", "b"]}
    assert loaded.cfg == model.cfg
    for d in sep.docs:
        np.testing.assert_array_equal(loaded.predict_proba(d), model.predict_proba(d))
    assert predict(loaded, sep.docs) == predict(model, sep.docs)


def test_checkpoint_errors(tmp_path):
    model = Model.build(TINY, 5, 2)
    path = tmp_path / "m.bin"
    save_checkpoint(model, path)
    raw = path.read_bytes()
    (tmp_path / "trunc.bin").write_bytes(raw[:-3])
    with pytest.raises(CorruptTensor):
        load_checkpoint(tmp_path / "trunc.bin")
    (tmp_path / "extra.bin").write_bytes(raw + b"\0")
    with pytest.raises(CorruptTensor):
        load_checkpoint(tmp_path / "extra.bin")
    (tmp_path / "magic.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(BadMagic):
        load_checkpoint(tmp_path / "magic.bin")
    (tmp_path / "ver.bin").write_bytes(raw[:4] + (2).to_bytes(4, "little") + raw[8:])
    with pytest.raises(VersionMismatch):
        load_checkpoint(tmp_path / "ver.bin")
    with pytest.raises(IoError):
        load_checkpoint(tmp_path / "missing.bin")
