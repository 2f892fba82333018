import json

import numpy as np
import pytest

from tgc.cli import main
from tgc.data import write_dataset
from tgc.synthetic import multimodal_corpus, separable_corpus
from tgc.train import load_checkpoint, save_checkpoint

SMALL = "d_embed = 16\nwidths = 16, 8\nd_fuse = 8\nbatch_size = 16\n"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def assert_error_line(err, code):
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith(f"error: {code}:")


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL + "epochs = 5\n")
    return p


@pytest.fixture
def sep_path(tmp_path):
    p = tmp_path / "sep.jsonl"
    write_dataset(separable_corpus(n_docs=60, vocab_size=60, seed=7), p)
    return p


@pytest.fixture
def mm_path(tmp_path):
    p = tmp_path / "mm.jsonl"
    write_dataset(multimodal_corpus(n_docs=60, seed=7), p)
    return p


@pytest.fixture
def trained(tmp_path, capsys, mm_path, cfg):
    model = tmp_path / "m.bin"
    assert run(capsys, "train", "--data", mm_path, "--config", cfg, "--out-model", model)[0] == 0
    return model


def report_dict(path):
    return dict(line.split("\t", 1) for line in path.read_text().splitlines())


def test_preprocess(tmp_path, capsys, toy_path):
    code, out, _ = run(capsys, "preprocess", "--data", toy_path, "--out", tmp_path / "pre")
    assert code == 0
    assert (tmp_path / "pre" / "vocab.tsv").exists()
    stats = dict(l.split("\t") for l in out.splitlines())
    assert stats["docs"] == "4" and int(stats["vocab_size"]) == 7
    first = json.loads((tmp_path / "pre" / "corpus.jsonl").read_text().splitlines()[0])
    assert first["id"] == "r0" and first["label"] == 1


def test_preprocess_missing_text(tmp_path, capsys):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"id": "a", "text": "x", "label": "p"}\n{"id": "doc-7", "label": "p"}\n')
    code, _, err = run(capsys, "preprocess", "--data", p, "--out", tmp_path / "o")
    assert code == 2
    assert_error_line(err, "DatasetError")
    assert "doc-7" in err and ":2:" in err


def test_preprocess_empty_file(tmp_path, capsys):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    code, _, err = run(capsys, "preprocess", "--data", p, "--out", tmp_path / "o")
    assert code == 2
    assert_error_line(err, "EmptyCorpus")


def test_train_writes_checkpoint_and_report(trained):
    rep = report_dict(trained.with_name("m.bin.report.tsv"))
    assert [k for k in rep if k.startswith("loss.")] == [f"loss.{e}" for e in range(5)]
    assert rep["seed"] == "42" and rep["config.epochs"] == "5"
    assert "wall_time_s" not in rep
    model, meta = load_checkpoint(trained)
    assert meta["labels"] == ["topic_a", "topic_b"]


def test_train_reports_are_identical(tmp_path, capsys, mm_path, cfg, trained):
    other = tmp_path / "m2.bin"
    run(capsys, "train", "--data", mm_path, "--config", cfg, "--out-model", other, "--report", tmp_path / "r2.tsv")
    assert (tmp_path / "r2.tsv").read_bytes() == trained.with_name("m.bin.report.tsv").read_bytes()
    assert other.read_bytes() == trained.read_bytes()


def test_train_divergence_exits_3(tmp_path, capsys, sep_path):
    p = tmp_path / "div.cfg"
    p.write_text(SMALL + "epochs = 5\nlr0 = 1e6\n")
    code, _, err = run(capsys, "train", "--data", sep_path, "--config", p, "--out-model", tmp_path / "d.bin")
    assert code == 3
    assert_error_line(err, "NonFiniteLoss")
    assert "non-finite" in err


def test_train_config_error_exits_2(tmp_path, capsys, sep_path):
    p = tmp_path / "bad.cfg"
    p.write_text("learning_rate = 0.1\n")
    code, _, err = run(capsys, "train", "--data", sep_path, "--config", p, "--out-model", tmp_path / "x.bin")
    assert code == 2
    assert_error_line(err, "ConfigError")


def test_eval_after_convergence(tmp_path, capsys, sep_path):
    p = tmp_path / "long.cfg"
    p.write_text(SMALL + "epochs = 30\nlr0 = 0.05\n")
    model = tmp_path / "s.bin"
    assert run(capsys, "train", "--data", sep_path, "--config", p, "--out-model", model)[0] == 0
    code, out, _ = run(capsys, "eval", "--data", sep_path, "--model", model, "--report", tmp_path / "e.tsv")
    assert code == 0
    metrics = dict(l.split("\t") for l in out.splitlines())
    assert float(metrics["accuracy"]) >= 0.95
    assert (tmp_path / "e.tsv").read_text() == out


def test_eval_zeroed_classifier_predicts_class_zero(tmp_path, capsys, mm_path, trained):
    model, meta = load_checkpoint(trained)
    model.params["cls.W"][:] = 0
    model.params["cls.b"][:] = 0
    zeroed = tmp_path / "zero.bin"
    save_checkpoint(model, zeroed, meta)
    code, out, _ = run(capsys, "eval", "--data", mm_path, "--model", zeroed)
    labels = [json.loads(l)["label"] for l in mm_path.read_text().splitlines()]
    share = labels.count("topic_a") / len(labels)
    assert code == 0
    assert float(dict(l.split("\t") for l in out.splitlines())["accuracy"]) == pytest.approx(share)


def test_eval_unseen_label(tmp_path, capsys, trained):
    p = tmp_path / "new.jsonl"
    p.write_text('{"id": "a", "text": "ka1", "label": "topic_z", "modalities": {"image": [0,0,0,0,0,0,0,0]}}\n')
    code, _, err = run(capsys, "eval", "--data", p, "--model", trained)
    assert code == 2
    assert_error_line(err, "LabelMismatch")


def test_eval_thread_count_does_not_change_results(tmp_path, capsys, monkeypatch, mm_path, trained):
    outs = []
    for n in ("1", "3"):
        monkeypatch.setenv("TGC_THREADS", n)
        outs.append(run(capsys, "eval", "--data", mm_path, "--model", trained, "--report", tmp_path / f"{n}.tsv")[1])
    assert outs[0] == outs[1]


def test_predict(tmp_path, capsys, trained):
    args = ["predict", "--model", trained, "--text", "ka1 ka2 mo3", "--modality", "image=1,0,0,0,0,0,0,0"]
    code, out, _ = run(capsys, *args)
    assert code == 0
    lines = dict(l.split("\t") for l in out.splitlines())
    assert lines["label"] in ("topic_a", "topic_b")
    probs = [float(lines["prob.topic_a"]), float(lines["prob.topic_b"])]
    assert sum(probs) == pytest.approx(1.0, abs=2e-6)
    assert all(len(lines[k].split(".")[1]) == 6 for k in ("prob.topic_a", "prob.topic_b"))
    assert run(capsys, *args)[1] == out


def test_predict_modality_from_file(tmp_path, capsys, trained):
    v = tmp_path / "img.f32"
    v.write_bytes(np.ones(8, dtype="<f4").tobytes())
    code, out, _ = run(capsys, "predict", "--model", trained, "--text", "ka1", "--modality", f"image={v}")
    assert code == 0 and out.startswith("label\t")


def test_predict_missing_modality(capsys, trained):
    code, _, err = run(capsys, "predict", "--model", trained, "--text", "ka1")
    assert code == 2
    assert_error_line(err, "MissingModality")


def test_predict_bad_checkpoint(tmp_path, capsys):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"not a model")
    code, _, err = run(capsys, "predict", "--model", p, "--text", "x")
    assert code == 2
    assert_error_line(err, "BadMagic")


def test_gradcheck(capsys):
    code, out, _ = run(capsys, "gradcheck", "--seed", "0")
    assert code == 0
    assert float(dict(l.split("\t")[:2] for l in out.splitlines())["max_rel_error"]) < 1e-4


def test_gradcheck_injected_fault(capsys):
    code, _, err = run(capsys, "gradcheck", "--seed", "0", "--inject-fault", "layer0.W")
    assert code == 1
    assert_error_line(err, "GradientMismatch")
    assert "layer0.W" in err


def test_ablate_table(tmp_path, capsys, mm_path, cfg):
    out_dir = tmp_path / "abl"
    code, out, _ = run(capsys, "ablate", "--data", mm_path, "--config", cfg, "--out", out_dir)
    assert code == 0
    rows = (out_dir / "ablation.tsv").read_text().splitlines()
    assert rows[0] == "Model\tAcc\tF1"
    assert [r.split("\t")[0] for r in rows[1:]] == ["GNN-MMC", "GNN", "MMC"]
    for mode in ("full", "gnn-only", "mmc-only"):
        assert report_dict(out_dir / f"report_{mode}.tsv")["config.mode"] == mode


def test_ablate_without_modalities(tmp_path, capsys, sep_path, cfg):
    code, _, err = run(capsys, "ablate", "--data", sep_path, "--config", cfg, "--out", tmp_path / "a")
    assert code == 2
    assert_error_line(err, "MissingModality")


def test_usage_errors_are_single_line(capsys):
    code, _, err = run(capsys, "train")
    assert code == 2
    assert_error_line(err, "UsageError")


def test_bad_thread_setting(capsys, monkeypatch, mm_path, trained):
    monkeypatch.setenv("TGC_THREADS", "many")
    code, _, err = run(capsys, "eval", "--data", mm_path, "--model", trained)
    assert code == 2
    assert_error_line(err, "ConfigError")


def test_synth(tmp_path, capsys):
    code, out, _ = run(capsys, "synth", "--kind", "multimodal", "--n-docs", "12", "--out", tmp_path / "s.jsonl")
    assert code == 0 and out == "docs\t12\n"
    assert len((tmp_path / "s.jsonl").read_text().splitlines()) == 12
