"""Run configuration: JSON documents mapped onto dataclasses, validated up front."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .model import ModelConfig


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    images: str = ""
    labels: str = ""
    # optional separate test files; without them train and test are drawn disjointly from one pool
    test_images: str = ""
    test_labels: str = ""
    classes: tuple[int, ...] = (0, 5)
    n_train: int = 1000
    n_test: int = 200
    downsample: int = 1
    class_count: int = 10


@dataclass
class TrainConfig:
    lr: float = 0.005
    batch_size: int = 64
    epochs: int = 30


@dataclass
class SearchConfig:
    lr: float = 0.001
    genome_batch: int = 8
    inner_epochs: int = 5
    iterations: int = 20
    val_fraction: float = 0.1
    entropy_beta: float = 0.01
    dropout: float = 0.2


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    genome_seed: int = 0
    seed: int = 0
    run_id: str = ""

    @property
    def task_name(self) -> str:
        c = self.data.classes
        return "&".join(str(x) for x in c) if len(c) == 2 or len(c) < self.data.class_count else f"{len(c)}-class"

    def resolved_run_id(self) -> str:
        if self.run_id:
            return self.run_id
        digest = hashlib.sha256(json.dumps(to_dict(self), sort_keys=True).encode()).hexdigest()
        return digest[:12]


_SECTIONS = {"data": DataConfig, "model": ModelConfig, "train": TrainConfig, "search": SearchConfig}


def _coerce(section: str, cls, raw) -> object:
    if not isinstance(raw, dict):
        raise ConfigError(f"section {section!r} must be an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key {section}.{key}")
    kwargs = {}
    for key, value in raw.items():
        default = getattr(cls(), key)
        if isinstance(default, tuple):
            if not isinstance(value, list):
                raise ConfigError(f"{section}.{key} must be an array")
            value = tuple(value)
        elif isinstance(default, bool) or not isinstance(value, type(default)):
            if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            else:
                raise ConfigError(f"{section}.{key} must be {type(default).__name__}, got {value!r}")
        kwargs[key] = value
    return cls(**kwargs)


def from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    top = {"genome_seed", "seed", "run_id"}
    for key in doc:
        if key not in _SECTIONS and key not in top:
            raise ConfigError(f"unknown key {key}")
    kwargs = {name: _coerce(name, cls, doc.get(name, {})) for name, cls in _SECTIONS.items()}
    for key in top:
        if key in doc:
            kwargs[key] = doc[key]
    try:
        cfg = RunConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    validate(cfg)
    return cfg


def to_dict(cfg: RunConfig) -> dict:
    def conv(v):
        if isinstance(v, tuple):
            return [conv(x) for x in v]
        return v

    out = {}
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        out[name] = {f.name: conv(getattr(sec, f.name)) for f in dataclasses.fields(sec)}
    out.update(genome_seed=cfg.genome_seed, seed=cfg.seed, run_id=cfg.run_id)
    return out


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    return from_dict(doc)


def _require(cond, key, msg):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def validate(cfg: RunConfig) -> None:
    d, m, t, s = cfg.data, cfg.model, cfg.train, cfg.search
    _require(isinstance(cfg.seed, int) and not isinstance(cfg.seed, bool), "seed", "must be an integer")
    _require(isinstance(cfg.genome_seed, int), "genome_seed", "must be an integer")
    _require(isinstance(cfg.run_id, str), "run_id", "must be a string")
    _require(len(set(d.classes)) == len(d.classes) and len(d.classes) >= 2, "data.classes", "need >= 2 distinct classes")
    _require(all(0 <= c < d.class_count for c in d.classes), "data.classes", f"classes must be in 0..{d.class_count - 1}")
    _require(d.n_train >= 1, "data.n_train", "must be positive")
    _require(d.n_test >= 1, "data.n_test", "must be positive")
    _require(d.downsample in (1, 2, 4), "data.downsample", "must be 1, 2 or 4")
    _require(bool(d.test_images) == bool(d.test_labels), "data.test_images", "test_images and test_labels go together")
    _require(m.kernel >= 1, "model.kernel", "must be positive")
    _require(len(m.window) == 2 and min(m.window) >= 1, "model.window", "must be [m, n] with m, n >= 1")
    _require(2 <= m.n_qubits <= 12, "model.window", f"m*n = {m.n_qubits} qubits outside 2..12")
    _require(m.stride >= 1, "model.stride", "must be >= 1")
    _require(m.n_layers >= 1, "model.n_layers", "must be >= 1")
    _require(0 <= m.readout < m.n_qubits, "model.readout", f"must be in 0..{m.n_qubits - 1}")
    _require(all(c >= 1 for c in m.conv_channels), "model.conv_channels", "channel counts must be positive")
    _require(not m.conv_channels or m.conv_channels[-1] == 1, "model.conv_channels", "last conv must have 1 channel")
    _require(all(h >= 1 for h in m.fc_hidden), "model.fc_hidden", "widths must be positive")
    _require(m.n_classes == len(d.classes), "model.n_classes", f"must equal len(data.classes) = {len(d.classes)}")
    _require(t.lr >= 0, "train.lr", "must be >= 0")
    _require(t.batch_size >= 1, "train.batch_size", "must be positive")
    _require(t.epochs >= 0, "train.epochs", "must be >= 0")
    _require(s.lr >= 0, "search.lr", "must be >= 0")
    _require(s.genome_batch >= 1, "search.genome_batch", "must be positive")
    _require(s.inner_epochs >= 1, "search.inner_epochs", "must be positive")
    _require(s.iterations >= 1, "search.iterations", "must be positive")
    _require(0 < s.val_fraction < 1, "search.val_fraction", "must be in (0, 1)")
    _require(0 <= s.dropout < 1, "search.dropout", "must be in [0, 1)")
    _require(s.entropy_beta >= 0, "search.entropy_beta", "must be >= 0")
    try:
        m.shapes()
    except ValueError as e:
        raise ConfigError(f"model: {e}") from None


def desk_preset(**overrides) -> RunConfig:
    """14x14 inputs, one conv, 9-qubit filter, 200/50 samples, 10 epochs."""
    cfg = RunConfig(
        data=DataConfig(classes=(0, 1), n_train=200, n_test=50, downsample=2),
        model=ModelConfig(input_shape=(14, 14), conv_channels=(1,), fc_hidden=(), n_classes=2),
        train=TrainConfig(epochs=10),
        search=SearchConfig(inner_epochs=5, iterations=20),
    )
    for k, v in overrides.items():
        setattr(cfg, k, v)
    validate(cfg)
    return cfg


def full_preset(classes=(0, 5)) -> RunConfig:
    """Full-size protocol: 28x28, Conv(1->4)-Pool-Conv(4->1)-Pool, 9 qubits, 1000/200, 30 epochs."""
    cfg = RunConfig(
        data=DataConfig(classes=tuple(classes), n_train=1000, n_test=200),
        model=ModelConfig(n_classes=len(classes)),
    )
    validate(cfg)
    return cfg
