"""Configuration dataclasses and config-file loading (YAML or JSON)."""

import dataclasses
from dataclasses import dataclass, field

import yaml


@dataclass
class ModelConfig:
    backbone_widths: tuple = (96, 256, 384, 384, 256)
    temporal_mode: str = "attention"
    pool_size: int = 4
    queue_window: int = 3
    refine_channels: int = 192
    attention_heads: int = 6
    head_hidden: int | None = None
    size_bias: float = 64.0
    swap_encoder_query: bool = False


@dataclass
class CurriculumConfig:
    enabled: bool = True
    boundaries: tuple = (33, 50)
    lengths: tuple = (2, 3, 4)
    fixed_length: int = 2


@dataclass
class LrConfig:
    start: float = 0.005
    end: float = 0.0005


@dataclass
class TrainConfig:
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    lr: LrConfig = field(default_factory=LrConfig)
    epochs: int = 100
    freeze_epochs: int = 10
    batch_size: int = 124
    momentum: float = 0.9
    seed: int = 0


@dataclass
class HarnessConfig:
    fps: float = 30.0
    window_penalty: float = 0.3
    scheduler: str = "skip"  # or "fifo"


@dataclass
class Config:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)

    def to_dict(self):
        return dataclasses.asdict(self)


def _build(cls, data, path):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValueError(f"config section {path or 'root'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ValueError(
            f"unknown config key(s) {sorted(unknown)} under {path or 'root'}")
    kwargs = {}
    for name, value in data.items():
        ftype = fields[name].type
        sub = {"model": ModelConfig, "train": TrainConfig,
               "harness": HarnessConfig, "curriculum": CurriculumConfig,
               "lr": LrConfig}.get(name)
        if sub is not None and str(ftype).find(sub.__name__) >= 0:
            kwargs[name] = _build(sub, value, f"{path}.{name}" if path else name)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(data):
    """Build a Config from a nested dict, rejecting unknown keys."""
    return _build(Config, data, "")


def load_config(path):
    """Load a YAML (or JSON) config file into a Config."""
    with open(path) as f:
        data = yaml.safe_load(f)
    return config_from_dict(data)
