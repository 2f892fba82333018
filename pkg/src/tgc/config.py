"""Run configuration and its ``key = value`` file format."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .graph import GraphConfig


@dataclass(frozen=True)
class Config:
    # text pipeline
    min_count: int = 1
    stopwords: str = ""  # path; empty = built-in list, "none" = no filtering
    # graph construction
    window_size: int = 3
    ppmi_threshold: float = 0.0
    top_k_per_node: int = 16
    # model
    d_embed: int = 128
    layer_kind: str = "gat"
    widths: tuple[int, ...] = (128, 64)
    sample_size: int = 10
    sage_aggregator: str = "mean"
    slope: float = 0.2
    d_fuse: int = 64
    modality_dims: tuple[tuple[str, int], ...] = ()
    # training
    mode: str = "full"
    epochs: int = 50
    batch_size: int = 64
    lr0: float = 0.01
    decay: float = 0.95
    momentum: float = 0.9
    seed: int = 42

    def __post_init__(self):
        checks = [
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (0 < self.decay <= 1, "decay must be in (0, 1]"),
            (0 <= self.momentum < 1, "momentum must be in [0, 1)"),
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.min_count >= 1, "min_count must be >= 1"),
            (self.sample_size >= 1, "sample_size must be >= 1"),
            (0 < self.slope < 1, "slope must be in (0, 1)"),
            (len(self.widths) >= 1 and all(w >= 1 for w in self.widths), "widths must be positive"),
            (self.d_embed >= 1 and self.d_fuse >= 1, "dimensions must be positive"),
            (self.mode in ("full", "gnn-only", "mmc-only"), f"unknown mode {self.mode!r}"),
            (self.layer_kind in ("gat", "gcn", "sage", "nn4g"), f"unknown layer_kind {self.layer_kind!r}"),
            (self.sage_aggregator in ("mean", "pooling"), f"unknown sage_aggregator {self.sage_aggregator!r}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        try:
            self.graph_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def graph_config(self) -> GraphConfig:
        return GraphConfig(self.window_size, self.ppmi_threshold, self.top_k_per_node)

    def with_(self, **changes) -> "Config":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        d["modality_dims"] = [list(x) for x in self.modality_dims]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        d = dict(d)
        d["widths"] = tuple(d.get("widths", cls.widths))
        d["modality_dims"] = tuple((str(n), int(v)) for n, v in d.get("modality_dims", ()))
        return cls(**d)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            val = getattr(self, f.name)
            if f.name == "modality_dims":
                lines += [f"modality.{n} = {d}" for n, d in val]
            elif f.name == "widths":
                lines.append(f"widths = {','.join(map(str, val))}")
            else:
                lines.append(f"{f.name} = {val}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(Config)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    if key == "widths":
        return tuple(int(x) for x in raw.split(",") if x.strip())
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def parse_config(text: str, base: Config | None = None) -> Config:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    values: dict = {}
    modalities: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        try:
            if key.startswith("modality."):
                modalities[key[len("modality."):]] = int(raw)
            elif key in _TYPES and key != "modality_dims":
                values[key] = _coerce(key, raw)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {raw!r}") from None
    if modalities:
        values["modality_dims"] = tuple(modalities.items())
    return replace(base or Config(), **values)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
