"""Dataset files: JSON-lines records, modality vectors, and model-ready documents.

One record per line::

    {"id": "d1", "text": "...", "label": "pos", "modalities": {"image": "img/d1.f32", "meta": [0.1, 3]}}

A modality value is either a path (relative to the dataset file) to raw
little-endian float32 values, or an inline list of numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import Config
from .errors import DatasetError, EmptyCorpus, LabelMismatch, MissingModality
from .graph import build_graph
from .model import DocInput
from .textpipe import UNK_ID, DEFAULT_STOPWORDS, Vocabulary, build_vocab, encode, load_stopwords, preprocess


@dataclass
class Record:
    id: str
    text: str
    label: str
    modalities: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = {"id": self.id, "text": self.text, "label": self.label}
        if self.modalities:
            d["modalities"] = self.modalities
        return d


def parse_records(lines: Iterable[str], source: str = "<data>") -> list[Record]:
    records, names, seen_ids = [], None, set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        where = f"{source}:{lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{where}: invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise DatasetError(f"{where}: record must be an object")
        rid = obj.get("id")
        if not isinstance(rid, str) or not rid:
            raise DatasetError(f"{where}: record has no string 'id'")
        for key in ("text", "label"):
            if not isinstance(obj.get(key), str):
                raise DatasetError(f"{where}: record {rid!r} is missing string field {key!r}")
        mods = obj.get("modalities", {}) or {}
        if not isinstance(mods, dict):
            raise DatasetError(f"{where}: record {rid!r} has non-object 'modalities'")
        if names is None:
            names = set(mods)
        elif set(mods) != names:
            raise DatasetError(f"{where}: record {rid!r} has modalities {sorted(mods)}, expected {sorted(names)}")
        if rid in seen_ids:
            raise DatasetError(f"{where}: duplicate id {rid!r}")
        seen_ids.add(rid)
        records.append(Record(rid, obj["text"], obj["label"], dict(mods)))
    return records


def parse_dataset(path: str | Path) -> list[Record]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from None
    records = parse_records(text.splitlines(), str(path))
    if not records:
        raise EmptyCorpus(f"{path} contains no records")
    return records


def write_dataset(records: Sequence[Record], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def read_vector(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) % 4:
        raise DatasetError(f"{path}: size {len(raw)} is not a multiple of 4 bytes")
    return np.frombuffer(raw, dtype="<f4").astype(np.float32)


def write_vector(values, path: str | Path) -> None:
    Path(path).write_bytes(np.asarray(values, dtype="<f4").tobytes())


def load_modality(value, base_dir: Path = Path(".")) -> np.ndarray:
    if isinstance(value, list):
        try:
            vec = np.asarray(value, dtype=np.float32)
        except (TypeError, ValueError):
            raise DatasetError("inline modality must be a list of numbers") from None
    elif isinstance(value, str):
        p = Path(value)
        try:
            vec = read_vector(p if p.is_absolute() else base_dir / p)
        except OSError as exc:
            raise DatasetError(f"cannot read modality file {value}: {exc}") from None
    else:
        raise DatasetError(f"unsupported modality value {value!r}")
    if vec.ndim != 1 or not np.all(np.isfinite(vec)):
        raise DatasetError("modality vectors must be flat and finite")
    return vec


def stoplist_for(cfg: Config) -> frozenset[str]:
    if not cfg.stopwords:
        return DEFAULT_STOPWORDS
    if cfg.stopwords.lower() == "none":
        return frozenset()
    return load_stopwords(cfg.stopwords)


@dataclass
class Prepared:
    docs: list[DocInput]
    records: list[Record]
    vocab: Vocabulary
    labels: list[str]
    modalities: tuple[tuple[str, int], ...]

    @property
    def y(self) -> list[int]:
        return [d.label for d in self.docs]


def label_names(records: Sequence[Record]) -> list[str]:
    return sorted({r.label for r in records})


def resolve_modalities(records: Sequence[Record], cfg: Config, base_dir: Path) -> tuple[tuple[str, int], ...]:
    """Declared modality dims (config order), or dims inferred from the first record."""
    if cfg.modality_dims:
        return cfg.modality_dims
    if not records or not records[0].modalities:
        return ()
    first = records[0].modalities
    return tuple((name, len(load_modality(first[name], base_dir))) for name in sorted(first))


def prepare(
    records: Sequence[Record],
    cfg: Config,
    base_dir: str | Path = ".",
    vocab: Vocabulary | None = None,
    labels: Sequence[str] | None = None,
    modalities: tuple[tuple[str, int], ...] | None = None,
) -> Prepared:
    """Tokenize, encode, build graphs and load modality vectors.

    Pass ``vocab``/``labels``/``modalities`` from a trained model when
    preparing evaluation data; unseen labels then raise LabelMismatch.
    """
    base_dir = Path(base_dir)
    stop = stoplist_for(cfg)
    tokens = [preprocess(r.text, stop) for r in records]
    if vocab is None:
        vocab = build_vocab(tokens, cfg.min_count)
    if labels is None:
        labels = label_names(records)
    index = {name: i for i, name in enumerate(labels)}
    if modalities is None:
        modalities = resolve_modalities(records, cfg, base_dir)
    gcfg = cfg.graph_config()
    docs = []
    for rec, toks in zip(records, tokens):
        if rec.label not in index:
            raise LabelMismatch(f"record {rec.id!r}: label {rec.label!r} not among {list(labels)}")
        ids = encode(toks, vocab) or [UNK_ID]
        mods = {}
        for name, dim in modalities:
            if name not in rec.modalities:
                raise MissingModality(f"record {rec.id!r} lacks modality {name!r}")
            try:
                vec = load_modality(rec.modalities[name], base_dir)
            except DatasetError as exc:
                raise DatasetError(f"record {rec.id!r}: {exc}") from None
            if len(vec) != dim:
                raise DatasetError(f"record {rec.id!r}: modality {name!r} has {len(vec)} values, expected {dim}")
            mods[name] = vec.reshape(1, -1)
        docs.append(DocInput(build_graph(ids, gcfg), np.asarray(ids), mods, index[rec.label]))
    return Prepared(docs, list(records), vocab, list(labels), tuple(modalities))


def load_prepared(path: str | Path, cfg: Config, **kwargs) -> Prepared:
    path = Path(path)
    return prepare(parse_dataset(path), cfg, base_dir=path.parent, **kwargs)


def doc_from_text(
    text: str,
    cfg: Config,
    vocab: Vocabulary,
    modalities: dict[str, np.ndarray] | None = None,
) -> DocInput:
    """An unlabeled document for prediction; an all-stopword text becomes [UNK]."""
    ids = encode(preprocess(text, stoplist_for(cfg)), vocab) or [UNK_ID]
    mods = {k: np.asarray(v, dtype=np.float32).reshape(1, -1) for k, v in (modalities or {}).items()}
    return DocInput(build_graph(ids, cfg.graph_config()), np.asarray(ids), mods, label=-1)
