"""TOML run configuration.

Every section maps onto a dataclass; unknown keys are rejected so typos fail
loudly. Relative paths are resolved against the config file's directory.

Seed derivation from the single global ``seed``::

    generator seed = derive_seed(seed, 1)
    split seed     = derive_seed(seed, 2)
    model init     = derive_seed(seed, 3)
    training seed  = derive_seed(seed, 4)   # per-client round seeds derive from this
"""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import tomli_w

from .cohort import GeneratorConfig
from .errors import ConfigError
from .federated import FederatedConfig, derive_seed
from .nn import ADAM, FCN, GRU, ArchitectureSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

GENERATE, SPLIT, INIT, TRAIN = 1, 2, 3, 4


@dataclass
class PathsConfig:
    data_dir: str = "data"
    out_dir: str = "runs"
    cohort: str = "cohort.jsonl"
    labels: str = "labels.jsonl"
    split: str = "split.jsonl"
    vocab: str = "vocab.jsonl"


@dataclass
class GeneratorSection:
    n_patients: int = 9867
    n_centers: int = 22
    center_decay: float = 0.75
    tf_fraction: float = 1824 / (1824 + 6859)
    excluded_fraction: float = 1184 / 9867
    n_diagnosis: int = 150
    n_procedure: int = 50
    n_prescription: int = 80
    n_risk_codes: int = 8
    n_order_pairs: int = 4
    risk_prevalence: float = 0.12
    pair_prevalence: float = 0.3
    order_strength: float = 4.0
    center_heterogeneity: float = 1.0
    mean_visits: float = 3.0


@dataclass
class SplitSection:
    test_fraction: float = 0.2
    min_count: int = 1


@dataclass
class ModelSection:
    kind: str = GRU
    fcn_hidden: list[int] = field(default_factory=lambda: [64])
    gru_hidden: int = 64
    embedding_dim: int = 32
    max_seq_len: int = 256


@dataclass
class TrainingSection:
    rounds: int = 30
    local_epochs: int = 1
    batch_size: int = 64
    optimizer: str = ADAM
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    min_train_size: int = 2
    centers: list[int] = field(default_factory=list)


@dataclass
class RunSection:
    record_time: bool = False


@dataclass
class RunConfig:
    seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    generator: GeneratorSection = field(default_factory=GeneratorSection)
    split: SplitSection = field(default_factory=SplitSection)
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    run: RunSection = field(default_factory=RunSection)
    base_dir: Path = field(default=Path("."), repr=False, compare=False)

    # -- derived objects -------------------------------------------------
    def path(self, name: str) -> Path:
        if name in ("data_dir", "out_dir"):
            p = Path(getattr(self.paths, name))
        else:
            p = Path(self.paths.data_dir) / getattr(self.paths, name)
        return p if p.is_absolute() else self.base_dir / p

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(**asdict(self.generator), seed=derive_seed(self.seed, GENERATE))

    @property
    def split_seed(self) -> int:
        return derive_seed(self.seed, SPLIT)

    def architecture(self, input_dim: int) -> ArchitectureSpec:
        m = self.model
        hidden = tuple(m.fcn_hidden) if m.kind == FCN else (m.gru_hidden,)
        return ArchitectureSpec(m.kind, input_dim, hidden, m.embedding_dim, derive_seed(self.seed, INIT))

    def federated_config(self, input_dim: int) -> FederatedConfig:
        t = self.training
        return FederatedConfig(
            self.architecture(input_dim), rounds=t.rounds, local_epochs=t.local_epochs,
            batch_size=t.batch_size, optimizer=t.optimizer, learning_rate=t.learning_rate,
            beta1=t.beta1, beta2=t.beta2, epsilon=t.epsilon,
            centers=tuple(t.centers) or None, seed=derive_seed(self.seed, TRAIN),
            min_train_size=t.min_train_size,
        )

    # -- file form ---------------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def validate(self):
        if self.model.kind not in (FCN, GRU):
            raise ConfigError(f"model.kind must be FCN or GRU, got {self.model.kind!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        self.generator_config().validate()
        self.federated_config(2)
        if not 0 < self.split.test_fraction < 1:
            raise ConfigError("split.test_fraction must be in (0, 1)")


_SECTIONS = {
    "paths": PathsConfig, "generator": GeneratorSection, "split": SplitSection,
    "model": ModelSection, "training": TrainingSection, "run": RunSection,
}


def _build(cls, raw: dict, where: str):
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        default = getattr(cls(), key)
        if isinstance(default, bool):
            ok = isinstance(value, bool)
        elif isinstance(default, float):
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            value = float(value)
        elif isinstance(default, int):
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif isinstance(default, list):
            ok = isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
        else:
            ok = isinstance(value, str)
        if not ok:
            raise ConfigError(f"[{where}] {key}: expected {type(default).__name__}, got {value!r}")
        kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(raw: dict, base_dir=".") -> RunConfig:
    raw = dict(raw)
    kwargs = {}
    if "seed" in raw:
        seed = raw.pop("seed")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError(f"seed must be an integer, got {seed!r}")
        kwargs["seed"] = seed
    for name, cls in _SECTIONS.items():
        section = raw.pop(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"[{name}] must be a table")
        kwargs[name] = _build(cls, section, name)
    if raw:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(raw))}")
    cfg = RunConfig(**kwargs, base_dir=Path(base_dir))
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, base_dir=path.parent)


def dump_config(cfg: RunConfig, path):
    Path(path).write_text(cfg.to_toml(), encoding="utf-8", newline="\n")
