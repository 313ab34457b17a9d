"""Run configuration: flat ``key = value`` files with per-field overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .errors import ConfigError
from .manifest import SPLITS
from .network import LOSS_MODES


@dataclass
class RunConfig:
    manifest: str | None = None
    out_dir: str | None = None
    checkpoint: str | None = None
    split: str = "validation"
    modalities: tuple = ("audio",)
    loss_mode: str = "framewise_ce"
    learning_rate: float = 0.08
    epochs: int = 60
    batch_size: int = 8
    seed: int = 0
    hidden_size: int = 16
    embed_dim: int = 16
    conv1: int = 4
    conv2: int = 4
    fusion_learning_rate: float = 0.1
    fusion_epochs: int = 80
    reg_weight: float = 1.0
    joint_fusion: bool = False

    def validate(self) -> "RunConfig":
        if self.loss_mode not in LOSS_MODES:
            raise ConfigError(f"loss_mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        if self.split not in SPLITS:
            raise ConfigError(f"split must be one of {SPLITS}, got {self.split!r}")
        if not self.modalities:
            raise ConfigError("at least one modality is required")
        if self.learning_rate <= 0 or self.fusion_learning_rate <= 0:
            raise ConfigError("learning rates must be positive")
        if self.epochs < 1 or self.fusion_epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch size must be at least 1")
        for name in ("hidden_size", "embed_dim", "conv1", "conv2"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.reg_weight < 0:
            raise ConfigError("reg_weight must be >= 0")
        return self


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _coerce(name: str, kind, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() not in _BOOL_WORDS:
                raise ValueError
            return _BOOL_WORDS[raw.lower()]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(part.strip() for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"config key {name!r}: cannot parse {raw!r}") from None
    return raw


def build_config(*sources) -> RunConfig:
    """Merge dicts of raw values (later wins), coerce types, validate."""
    cfg = RunConfig()
    known = {f.name: f for f in fields(RunConfig)}
    for source in sources:
        if not source:
            continue
        for key, raw in source.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if raw is None:
                continue
            current = getattr(cfg, key)
            kind = type(current) if current is not None else str
            setattr(cfg, key, _coerce(key, kind, raw))
    return cfg.validate()


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    values = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path} line {line_no}: expected 'key = value'")
            key, raw = text.split("=", 1)
            values[key.strip()] = raw.strip()
    return values
