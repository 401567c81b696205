"""Run configuration: flat sectioned key-value files.

Paths inside the file resolve relative to the file's own directory.
Every command echoes the fully resolved configuration into its output
directory so a run can be reproduced from its artifacts alone.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .context import ContextDims
from .errors import ConfigError
from .model import ModelSpec, TrainConfig
from .sampling import SamplerConfig

_SCHEMA: dict[str, tuple[str, ...]] = {
    "data": ("edges", "embeddings", "dep_paths", "frequencies", "test", "candidates"),
    "sampling": ("path_length", "negative_ratio", "max_paths"),
    "features": (
        "suffix_k",
        "oov_policy",
        "max_dep_len",
        "lemma_dim",
        "pos_dim",
        "dep_dim",
        "dir_dim",
        "context_hidden",
        "attention_dim",
        "propagated_dim",
        "classifier_hidden",
        "leaky_slope",
    ),
    "train": (
        "learning_rate",
        "epochs",
        "dropout",
        "weight_decay",
        "view_loss_weight",
        "consistency_weight",
        "batch_size",
        "seed",
    ),
    "eval": ("top_k",),
}


@dataclass
class RunConfig:
    edges: Path | None = None
    embeddings: Path | None = None
    dep_paths: Path | None = None
    frequencies: Path | None = None
    test: Path | None = None
    candidates: Path | None = None

    path_length: int = 3
    negative_ratio: int = 4
    max_paths: int = 0

    suffix_k: int = 3
    oov_policy: str = "zero"
    max_dep_len: int = 10
    lemma_dim: int = 50
    pos_dim: int = 4
    dep_dim: int = 5
    dir_dim: int = 1
    context_hidden: int = 200
    attention_dim: int = 0
    propagated_dim: int = 0
    classifier_hidden: int = 50
    leaky_slope: float = 0.2

    train: TrainConfig = field(default_factory=TrainConfig)
    top_k: int = 10

    @property
    def seed(self) -> int:
        return self.train.seed

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            path_length=self.path_length,
            negative_ratio=self.negative_ratio,
            rng_seed=self.seed,
        )

    def context_dims(self) -> ContextDims:
        return ContextDims(
            lemma=self.lemma_dim,
            pos=self.pos_dim,
            dep=self.dep_dim,
            direction=self.dir_dim,
            hidden=self.context_hidden,
            attention=self.attention_dim,
        )

    def model_spec(self, embed_dim: int) -> ModelSpec:
        return ModelSpec(
            path_length=self.path_length,
            embed_dim=embed_dim,
            propagated_dim=self.propagated_dim,
            classifier_hidden=self.classifier_hidden,
            leaky_slope=self.leaky_slope,
            seed=self.seed,
            context=self.context_dims(),
        )

    def require(self, *fields: str) -> None:
        """Check the named data files are configured and exist."""
        for name in fields:
            value: Path | None = getattr(self, name)
            if value is None:
                raise ConfigError(f"config is missing required [data] entry {name!r}")
        for name in ("edges", "embeddings", "dep_paths", "frequencies", "test", "candidates"):
            value = getattr(self, name)
            if value is not None and not value.is_file():
                raise ConfigError(f"configured {name} file does not exist: {value}")


def _path(raw: str, base: Path) -> Path:
    p = Path(raw)
    return p if p.is_absolute() else (base / p)


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file does not exist: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path.name}: {exc}") from exc

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path.name}: unknown section [{section}]")
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{path.name}: unknown key {key!r} in [{section}]")

    cfg = RunConfig()
    base = path.parent

    def read(section: str, key: str, cast, default):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key)
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path.name}: [{section}] {key} = {raw!r}: {exc}") from exc

    for name in ("edges", "embeddings", "dep_paths", "frequencies", "test", "candidates"):
        if parser.has_option("data", name):
            setattr(cfg, name, _path(parser.get("data", name), base))

    cfg.path_length = read("sampling", "path_length", int, cfg.path_length)
    cfg.negative_ratio = read("sampling", "negative_ratio", int, cfg.negative_ratio)
    cfg.max_paths = read("sampling", "max_paths", int, cfg.max_paths)

    cfg.suffix_k = read("features", "suffix_k", int, cfg.suffix_k)
    cfg.oov_policy = read("features", "oov_policy", str, cfg.oov_policy)
    cfg.max_dep_len = read("features", "max_dep_len", int, cfg.max_dep_len)
    cfg.lemma_dim = read("features", "lemma_dim", int, cfg.lemma_dim)
    cfg.pos_dim = read("features", "pos_dim", int, cfg.pos_dim)
    cfg.dep_dim = read("features", "dep_dim", int, cfg.dep_dim)
    cfg.dir_dim = read("features", "dir_dim", int, cfg.dir_dim)
    cfg.context_hidden = read("features", "context_hidden", int, cfg.context_hidden)
    cfg.attention_dim = read("features", "attention_dim", int, cfg.attention_dim)
    cfg.propagated_dim = read("features", "propagated_dim", int, cfg.propagated_dim)
    cfg.classifier_hidden = read("features", "classifier_hidden", int, cfg.classifier_hidden)
    cfg.leaky_slope = read("features", "leaky_slope", float, cfg.leaky_slope)

    defaults = TrainConfig()
    try:
        cfg.train = TrainConfig(
            learning_rate=read("train", "learning_rate", float, defaults.learning_rate),
            epochs=read("train", "epochs", int, defaults.epochs),
            dropout=read("train", "dropout", float, defaults.dropout),
            weight_decay=read("train", "weight_decay", float, defaults.weight_decay),
            view_loss_weight=read("train", "view_loss_weight", float, defaults.view_loss_weight),
            consistency_weight=read("train", "consistency_weight", float, defaults.consistency_weight),
            batch_size=read("train", "batch_size", int, defaults.batch_size),
            seed=seed_override if seed_override is not None else read("train", "seed", int, defaults.seed),
        )
    except ValueError as exc:
        raise ConfigError(f"{path.name}: {exc}") from exc

    cfg.top_k = read("eval", "top_k", int, cfg.top_k)

    if cfg.path_length < 1:
        raise ConfigError(f"{path.name}: path_length must be at least 1")
    if cfg.oov_policy not in ("zero", "mean"):
        raise ConfigError(f"{path.name}: oov_policy must be 'zero' or 'mean'")
    if cfg.top_k < 1:
        raise ConfigError(f"{path.name}: top_k must be at least 1")
    if cfg.seed < 0:
        raise ConfigError(f"{path.name}: seed must be non-negative")
    return cfg


def write_config(cfg: RunConfig, path: str | Path) -> None:
    """Echo the effective configuration, defaults resolved, to disk."""
    parser = configparser.ConfigParser()
    parser["data"] = {
        name: str(value)
        for name in ("edges", "embeddings", "dep_paths", "frequencies", "test", "candidates")
        if (value := getattr(cfg, name)) is not None
    }
    parser["sampling"] = {
        "path_length": str(cfg.path_length),
        "negative_ratio": str(cfg.negative_ratio),
        "max_paths": str(cfg.max_paths),
    }
    parser["features"] = {
        "suffix_k": str(cfg.suffix_k),
        "oov_policy": cfg.oov_policy,
        "max_dep_len": str(cfg.max_dep_len),
        "lemma_dim": str(cfg.lemma_dim),
        "pos_dim": str(cfg.pos_dim),
        "dep_dim": str(cfg.dep_dim),
        "dir_dim": str(cfg.dir_dim),
        "context_hidden": str(cfg.context_hidden),
        "attention_dim": str(cfg.attention_dim),
        "propagated_dim": str(cfg.propagated_dim),
        "classifier_hidden": str(cfg.classifier_hidden),
        "leaky_slope": repr(cfg.leaky_slope),
    }
    parser["train"] = {key: repr(value) for key, value in cfg.train.to_dict().items()}
    parser["eval"] = {"top_k": str(cfg.top_k)}
    with Path(path).open("w", encoding="utf-8") as fh:
        parser.write(fh)
