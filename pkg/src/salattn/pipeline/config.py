"""Training configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    """Hyperparameters for all three stages.

    Defaults are the desk-scale profile; :meth:`full_scale` returns the
    full-scale schedule and learning rates.
    """

    seed: int = 0
    # architecture
    base_channels: int = 8
    feature_channels: int = 64
    branch_channels: int = 0
    hidden_channels: int = 0  # 0 -> feature_channels
    dilation4: int = 2
    dilation5: int = 4
    num_patches: int = 4
    epsilon: float = 0.6
    loc_size: int = 64
    loc_channels: int = 64
    loc_hidden: int = 256
    gru_kernel: int = 5
    # losses
    k: float = 2.0
    lambda_ce: float = 1.0
    lambda_iou: float = 1.0
    iou_smooth: float = 1e-6
    # stage 1: backbone + decode head
    stage1_lr: float = 2e-3
    stage1_batch: int = 10
    stage1_epochs: int = 4
    # stage 2: patch generator + recurrent module, backbone frozen
    stage2_lr_pgm: float = 1e-4
    stage2_lr_ram: float = 5e-4
    stage2_batch: int = 1
    stage2_epochs: int = 4
    # stage 3: end to end; the backbone joins at the recurrent-module rate
    stage3_lr_spm: float = 0.0  # 0 -> stage2_lr_ram
    stage3_epochs: int = 2
    # validation-driven learning-rate decay
    val_fraction: float = 0.1
    decay_patience: int = 2
    decay_min_delta: float = 1e-4
    decay_factor: float = 0.5
    # desk-scale dataset profile
    image_size: int = 64
    train_count: int = 200
    test_count: int = 50

    def __post_init__(self):
        self.validate()

    @property
    def hidden(self) -> int:
        return self.hidden_channels or self.feature_channels

    @property
    def spm_lr_stage3(self) -> float:
        return self.stage3_lr_spm or self.stage2_lr_ram

    def validate(self) -> None:
        positive = ["base_channels", "feature_channels", "dilation4", "dilation5", "num_patches", "loc_size",
                    "loc_channels", "loc_hidden", "gru_kernel", "stage1_lr", "stage1_batch", "stage2_lr_pgm",
                    "stage2_lr_ram", "stage2_batch", "decay_patience", "image_size", "train_count"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("stage1_epochs", "stage2_epochs", "stage3_epochs", "test_count", "branch_channels",
                     "hidden_channels", "stage3_lr_spm", "lambda_ce", "lambda_iou"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.feature_channels % 4:
            raise ConfigError("feature_channels must be divisible by 4")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie in [0, 1)")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ConfigError("decay_factor must lie in (0, 1]")
        if self.gru_kernel % 2 == 0:
            raise ConfigError("gru_kernel must be odd")

    @classmethod
    def full_scale(cls, **overrides) -> "TrainConfig":
        base = dict(base_channels=64, feature_channels=512, stage1_lr=1e-5, stage2_lr_pgm=1e-4,
                    stage2_lr_ram=5e-6, stage1_epochs=10, stage2_epochs=10, stage3_epochs=5)
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))


def _coerce(name: str, kind, raw: str):
    try:
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config(text: str, base: TrainConfig | None = None) -> TrainConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    types = {f.name: f.type for f in fields(TrainConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, types[key], val)
    cfg = base or TrainConfig()
    return cfg.replace(**values)


def load_config(path) -> TrainConfig:
    return parse_config(Path(path).read_text())
