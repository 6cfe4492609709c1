"""Experiment configuration: a sectioned key = value text file.

Example::

    [dataset]
    kind = shapes2d
    subset = 10000

    [sweep]
    betas = 0, 1, 4
    seeds = 123, 427, 235, 921

Unknown sections or keys are rejected so typos cannot silently fall back
to defaults.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..dmetric import MetricConfig
from ..vae import TrainConfig

DEFAULT_SEEDS = (123, 427, 235, 921)
ARCHS = ("mlp", "conv", "pca", "ica")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "shapes2d"  # shapes2d | file
    path: str = ""
    subset: int = 10_000  # 0 = whole grid
    subset_seed: int = 0


@dataclass(frozen=True)
class ModelSpec:
    arch: str = "mlp"
    latent_dim: int = 10
    hidden: int = 1200
    ica_max_iter: int = 200
    ica_tol: float = 1e-4


@dataclass(frozen=True)
class TrainSpec:
    optimizer: str = "adagrad"
    lr: float = 1e-2
    batch_size: int = 64
    epochs: int = 20
    lr_decay: bool = True


@dataclass(frozen=True)
class MetricSpec:
    L: int = 64
    B: int = 5000
    B_test: int = 1000
    classifier: str = "linear"
    hidden: int = 64
    max_iter: int = 10_000
    excluded_factors: tuple = ("shape",)


@dataclass(frozen=True)
class FidSpec:
    extractor: str = "flatten"
    n_images: int = 500


@dataclass(frozen=True)
class SweepSpec:
    betas: tuple = (0.0, 1.0, 4.0)
    seeds: tuple = DEFAULT_SEEDS
    stages: tuple = ("train", "metric", "fid")
    workers: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainSpec = field(default_factory=TrainSpec)
    metric: MetricSpec = field(default_factory=MetricSpec)
    fid: FidSpec = field(default_factory=FidSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    out: str = "runs"

    def __post_init__(self):
        if not self.sweep.betas or not self.sweep.seeds:
            raise ConfigError("beta and seed lists must be nonempty")
        if any(b < 0 for b in self.sweep.betas):
            raise ConfigError("betas must be >= 0")
        if self.model.arch not in ARCHS:
            raise ConfigError(f"model.arch must be one of {ARCHS}, got {self.model.arch!r}")
        if self.dataset.kind not in ("shapes2d", "file"):
            raise ConfigError(f"dataset.kind must be shapes2d or file, got {self.dataset.kind!r}")
        if self.dataset.kind == "file" and not self.dataset.path:
            raise ConfigError("dataset.kind = file needs dataset.path")
        unknown = set(self.sweep.stages) - {"train", "metric", "fid", "viz"}
        if unknown:
            raise ConfigError(f"unknown stages {sorted(unknown)}")
        try:
            self.train_config(0.0, 0)
            self.metric_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def is_baseline(self) -> bool:
        return self.model.arch in ("pca", "ica")

    def train_config(self, beta: float, seed: int) -> TrainConfig:
        t = self.train
        return TrainConfig(beta=beta, optimizer=t.optimizer, lr=t.lr, batch_size=t.batch_size,
                           epochs=t.epochs, seed=seed, lr_decay=t.lr_decay)

    def metric_config(self) -> MetricConfig:
        m = self.metric
        return MetricConfig(L=m.L, B=m.B, B_test=m.B_test, classifier=m.classifier, hidden=m.hidden,
                            excluded_factors=tuple(m.excluded_factors), max_iter=m.max_iter)

    def semantic_dict(self) -> dict:
        """Everything that changes results; output location and pool size excluded."""
        d = asdict(self)
        d.pop("out")
        d["sweep"].pop("workers")
        d["sweep"].pop("betas")
        d["sweep"].pop("seeds")
        return d

    def hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, seeds=None, betas=None, out=None) -> "ExperimentConfig":
        sweep = self.sweep
        if seeds:
            sweep = replace(sweep, seeds=tuple(int(s) for s in seeds))
        if betas:
            sweep = replace(sweep, betas=tuple(float(b) for b in betas))
        return replace(self, sweep=sweep, out=out or self.out)


_SECTIONS = {"dataset": DatasetSpec, "model": ModelSpec, "train": TrainSpec,
             "metric": MetricSpec, "fid": FidSpec, "sweep": SweepSpec}


def _convert(value: str, default, key: str):
    try:
        if isinstance(default, bool):
            low = value.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(value)
            return low in ("true", "yes", "1")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            items = [v.strip() for v in value.split(",") if v.strip()]
            if default and isinstance(default[0], float):
                return tuple(float(v) for v in items)
            if default and isinstance(default[0], int):
                return tuple(int(v) for v in items)
            return tuple(items)
        return value.strip()
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {type(default).__name__}") from None


def parse_config(text: str) -> ExperimentConfig:
    # repeated sections merge with later keys winning; ';' and '#' start inline comments
    cp = configparser.ConfigParser(interpolation=None, strict=False, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys are case-sensitive (L vs l)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    parts = {}
    out = ExperimentConfig.out
    for section in cp.sections():
        items = dict(cp.items(section))
        if section == "output":
            out = items.pop("dir", out)
            if items:
                raise ConfigError(f"unknown keys in [output]: {sorted(items)}")
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        cls = _SECTIONS[section]
        defaults = cls()
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in items.items():
            if key not in known:
                raise ConfigError(f"unknown key {section}.{key}")
            kwargs[key] = _convert(value, getattr(defaults, key), f"{section}.{key}")
        parts[section] = cls(**kwargs)
    return ExperimentConfig(**parts, out=out)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def format_config(config: ExperimentConfig) -> str:
    lines = []
    for section in _SECTIONS:
        lines.append(f"[{section}]")
        for key, value in asdict(getattr(config, section)).items():
            if isinstance(value, (tuple, list)):
                value = ", ".join(str(v) for v in value)
            lines.append(f"{key} = {value}")
        lines.append("")
    lines += ["[output]", f"dir = {config.out}", ""]
    return "\n".join(lines)
