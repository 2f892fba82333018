"""Command-line entry point: ``tgc <command> ...``.

Every failure prints one line ``error: <code>: <message>`` to stderr.
Exit codes: 0 success, 1 gradient check failed, 2 bad input or config,
3 numerical failure during training.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import checks, metrics
from .config import Config, load_config
from .data import (
    Prepared,
    doc_from_text,
    load_modality,
    load_prepared,
    parse_dataset,
    prepare,
    resolve_modalities,
)
from .errors import ConfigError, IoError, MissingModality, NonFiniteLoss, TgcError
from .fusion import predict_label
from .model import Model
from .synthetic import multimodal_corpus, separable_corpus, write_corpus
from .textpipe import Vocabulary
from .train import fit, load_checkpoint, save_checkpoint

ABLATION_ROWS = (("GNN-MMC", "full"), ("GNN", "gnn-only"), ("MMC", "mmc-only"))


class CliError(TgcError):
    code = "UsageError"


class GradientMismatch(TgcError):
    code = "GradientMismatch"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _fmt(x: float) -> str:
    # shortest repr that round-trips, so equal floats give equal text
    return repr(float(x))


def _threads() -> int:
    raw = os.environ.get("TGC_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"TGC_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("TGC_THREADS must be >= 1")
    return n


def _write(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def _vocab_meta(vocab: Vocabulary) -> dict:
    return {"tokens": list(vocab.id_to_token), "doc_freq": vocab.doc_freq, "total_docs": vocab.total_docs}


def _vocab_from_meta(meta: dict) -> Vocabulary:
    v = meta["vocab"]
    return Vocabulary(tuple(v["tokens"]), dict(v["doc_freq"]), int(v["total_docs"]))


def predict_all(model: Model, docs) -> list[np.ndarray]:
    """Class probabilities per document, using up to TGC_THREADS workers.

    The model is read-only during inference and each document gets its own
    sampling generator, so results do not depend on the thread count.
    """
    n = _threads()
    if n == 1 or len(docs) < 2:
        return [model.predict_proba(d) for d in docs]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(model.predict_proba, docs))


def metrics_lines(m: metrics.MetricsReport, labels) -> list[str]:
    lines = [f"accuracy\t{_fmt(m.accuracy)}", f"f1\t{_fmt(m.aggregate_f1)}"]
    for c, name in enumerate(labels):
        lines += [
            f"precision.{name}\t{_fmt(m.precision[c])}",
            f"recall.{name}\t{_fmt(m.recall[c])}",
            f"f1.{name}\t{_fmt(m.f1[c])}",
        ]
    return lines


def evaluate(model: Model, prep: Prepared) -> metrics.MetricsReport:
    preds = [predict_label(p) for p in predict_all(model, prep.docs)]
    return metrics.report(preds, prep.y, len(prep.labels))


def run_report(cfg: Config, losses, m: metrics.MetricsReport, labels) -> str:
    """Deterministic ``key<TAB>value`` report. Wall time is printed, not stored."""
    lines = [f"seed\t{cfg.seed}"]
    lines += [f"config.{line.replace(' = ', chr(9), 1)}" for line in cfg.to_text().splitlines()]
    lines.append(f"epochs_run\t{len(losses)}")
    lines += [f"loss.{e}\t{_fmt(v)}" for e, v in enumerate(losses)]
    lines += metrics_lines(m, labels)
    return "\n".join(lines) + "\n"


def train_model(prep: Prepared, cfg: Config, log=None) -> tuple[Model, list[float]]:
    model = Model.build(cfg, len(prep.vocab), len(prep.labels), prep.modalities)
    losses = fit(prep.docs, model, cfg, on_epoch=log)
    return model, losses


# -- commands ---------------------------------------------------------------


def cmd_preprocess(args) -> int:
    cfg = load_config(args.config)
    prep = load_prepared(args.data, cfg)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from None
    vocab = prep.vocab
    _write(out / "vocab.tsv", "".join(
        f"{i}\t{t}\t{vocab.doc_freq.get(t, 0)}\n" for i, t in enumerate(vocab.id_to_token)
    ))
    _write(out / "labels.txt", "".join(f"{name}\n" for name in prep.labels))
    _write(out / "corpus.jsonl", "".join(
        json.dumps({"id": r.id, "label": d.label, "ids": [int(i) for i in d.ids],
                    "nodes": [int(i) for i in d.graph.nodes], "n_edges": d.graph.n_edges}) + "\n"
        for r, d in zip(prep.records, prep.docs)
    ))
    print(f"docs\t{len(prep.docs)}")
    print(f"vocab_size\t{len(vocab)}")
    print(f"labels\t{len(prep.labels)}")
    print(f"mean_nodes\t{np.mean([d.graph.n_nodes for d in prep.docs]):.3f}")
    print(f"mean_edges\t{np.mean([d.graph.n_edges for d in prep.docs]):.3f}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    prep = load_prepared(args.data, cfg)
    t0 = time.perf_counter()
    model, losses = train_model(prep, cfg, log=lambda e, loss: print(f"epoch\t{e}\t{loss:.6f}"))
    m = evaluate(model, prep)
    meta = {"vocab": _vocab_meta(prep.vocab), "labels": prep.labels}
    save_checkpoint(model, args.out_model, meta)
    report = run_report(cfg, losses, m, prep.labels)
    _write(args.report or f"{args.out_model}.report.tsv", report)
    print(f"train_accuracy\t{_fmt(m.accuracy)}")
    print(f"wall_time_s\t{time.perf_counter() - t0:.2f}")
    return 0


def _load(model_path):
    model, meta = load_checkpoint(model_path)
    return model, _vocab_from_meta(meta), meta["labels"]


def cmd_eval(args) -> int:
    model, vocab, labels = _load(args.model)
    # unseen labels raise LabelMismatch
    prep = prepare(parse_dataset(args.data), model.cfg, Path(args.data).parent, vocab=vocab,
                   labels=labels, modalities=model.modalities)
    m = evaluate(model, prep)
    text = "\n".join(metrics_lines(m, labels)) + "\n"
    _write(args.report or f"{args.model}.eval.tsv", text)
    sys.stdout.write(text)
    return 0


def _parse_modality_arg(arg: str) -> tuple[str, np.ndarray]:
    name, sep, value = arg.partition("=")
    if not sep or not name:
        raise CliError(f"--modality expects name=path or name=v1,v2,..., got {arg!r}")
    if Path(value).is_file():
        return name, load_modality(value)
    try:
        return name, load_modality(json.loads(value) if value.startswith("[") else
                                   [float(v) for v in value.split(",")])
    except (ValueError, json.JSONDecodeError):
        raise CliError(f"modality {name!r}: {value!r} is neither a file nor a list of numbers") from None


def cmd_predict(args) -> int:
    model, vocab, labels = _load(args.model)
    mods = dict(_parse_modality_arg(s) for s in args.modality)
    if model.uses_modalities:
        missing = [n for n, _ in model.modalities if n not in mods]
        if missing:
            raise MissingModality(f"model in {model.mode} mode needs modality {missing[0]!r}")
    doc = doc_from_text(args.text, model.cfg, vocab, mods)
    probs = predict_all(model, [doc])[0]
    print(f"label\t{labels[predict_label(probs)]}")
    for name, p in zip(labels, probs):
        print(f"prob.{name}\t{p:.6f}")
    return 0


def cmd_gradcheck(args) -> int:
    base = load_config(args.config)
    t0 = time.perf_counter()
    worst = None
    for seed in args.seed:
        for kind, agg in checks.VARIANTS:
            for mode in checks.MODES:
                r = checks.check_variant(base, kind, agg, mode, seed, args.eps, args.inject_fault)
                print(f"{r.label}\t{r.max_error:.3e}\t{r.worst_param}")
                if worst is None or r.max_error > worst.max_error:
                    worst = r
    print(f"max_rel_error\t{worst.max_error:.3e}")
    print(f"wall_time_s\t{time.perf_counter() - t0:.2f}")
    if worst.max_error >= args.tol:
        raise GradientMismatch(
            f"{worst.label}: parameter {worst.worst_param} has relative error {worst.max_error:.3e} >= {args.tol:g}"
        )
    return 0


def cmd_ablate(args) -> int:
    cfg = load_config(args.config)
    records = parse_dataset(args.data)
    base_dir = Path(args.data).parent
    if not resolve_modalities(records, cfg, base_dir):
        raise MissingModality("ablation needs a dataset with at least one modality")
    prep = prepare(records, cfg, base_dir)
    held = prep
    if args.eval_data:
        held = prepare(parse_dataset(args.eval_data), cfg, Path(args.eval_data).parent,
                       vocab=prep.vocab, labels=prep.labels, modalities=prep.modalities)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from None
    rows = []
    for row, mode in ABLATION_ROWS:
        mcfg = cfg.with_(mode=mode)
        t0 = time.perf_counter()
        model, losses = train_model(prep, mcfg)
        m = evaluate(model, held)
        _write(out / f"report_{mode}.tsv", run_report(mcfg, losses, m, prep.labels))
        print(f"trained\t{mode}\t{time.perf_counter() - t0:.2f}s")
        rows.append(f"{row}\t{100 * m.accuracy:.2f}\t{100 * m.aggregate_f1:.2f}")
    table = "\n".join(["Model\tAcc\tF1", *rows]) + "\n"
    _write(out / "ablation.tsv", table)
    sys.stdout.write(table)
    return 0


def cmd_synth(args) -> int:
    if args.kind == "separable":
        records = separable_corpus(n_docs=args.n_docs, seed=args.seed)
    else:
        records = multimodal_corpus(n_docs=args.n_docs, seed=args.seed)
    try:
        write_corpus(records, args.out)
    except OSError as exc:
        raise IoError(f"cannot write {args.out}: {exc}") from None
    print(f"docs\t{len(records)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tgc", description="Graph-based multimodal text classification.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("preprocess", help="build the vocabulary and encoded corpus")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("train", help="train a model and write a checkpoint")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out-model", required=True)
    s.add_argument("--report", help="report path (default: <out-model>.report.tsv)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="accuracy and F1 of a checkpoint on a dataset")
    s.add_argument("--data", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--report", help="report path (default: <model>.eval.tsv)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("predict", help="classify one text")
    s.add_argument("--model", required=True)
    s.add_argument("--text", required=True)
    s.add_argument("--modality", action="append", default=[], metavar="NAME=PATH|V1,V2,...")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("gradcheck", help="finite-difference check of every layer kind and mode")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, nargs="+", default=[0])
    s.add_argument("--eps", type=float, default=1e-4)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--inject-fault", metavar="PARAM", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("ablate", help="train full, gnn-only and mmc-only with one seed")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--eval-data", help="held-out dataset (default: the training data)")
    s.add_argument("--out", default="ablation", help="output directory")
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("synth", help="write a generated corpus")
    s.add_argument("--kind", choices=("separable", "multimodal"), required=True)
    s.add_argument("--n-docs", type=int, default=400)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except NonFiniteLoss as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 3
    except GradientMismatch as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except TgcError as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {exc.code}: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
