"""Run configuration: defaults, INI config file, and flag overrides.

Precedence is flags > file > preset > defaults.  Two schedule presets
exist: "full" (2,000 epochs, learning rate x0.1 every 350) and "desk"
(100 epochs, decay every 17 — the same shape compressed proportionally).
Validation happens before any work starts; auxiliary photometric
augmentations (contrast/brightness/saturation) are rejected outright
since the training protocol forbids them.
"""

import configparser
import os
from dataclasses import dataclass, fields

from .dataset import DEFAULT_RATIOS, DEFAULT_TEST_SET_SEED
from .errors import ConfigurationError
from .nn import TrainingConfig
from .trainer import strategy as strategy_for_id

CONFIG_SECTION = "qualtrain"
DATA_ENV_VAR = "QUALTRAIN_DATA"

PRESETS = {
    "full": {"epochs": 2000, "lr_decay_every": 350},
    "desk": {"epochs": 100, "lr_decay_every": 17},
}


@dataclass(frozen=True)
class RunConfig:
    data_dir: str = ""
    out_dir: str = "out"
    strategy: int = 1
    seed: int = 0
    preset: str = "full"
    epochs: int = 2000
    batch_size: int = 100
    learning_rate: float = 0.1
    lr_decay: float = 0.1
    lr_decay_every: int = 350
    weight_decay: float = 0.004
    momentum: float = 0.0
    loss: str = "squared"
    mixture_ratios: tuple = DEFAULT_RATIOS
    test_seed: int = DEFAULT_TEST_SET_SEED
    checkpoint_every: int = 50
    probe_count: int = 100
    report_formats: tuple = ("tsv", "markdown")
    augmentations: tuple = ()

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(
            batch_size=self.batch_size, epochs=self.epochs,
            learning_rate=self.learning_rate, lr_decay=self.lr_decay,
            lr_decay_every=self.lr_decay_every, weight_decay=self.weight_decay,
            momentum=self.momentum, seed=self.seed, loss=self.loss)


_TUPLE_FIELDS = {
    "mixture_ratios": float,
    "report_formats": str,
    "augmentations": str,
}


def _convert(name: str, value: str):
    if name in _TUPLE_FIELDS:
        parts = [p.strip() for p in value.split(",") if p.strip()]
        return tuple(_TUPLE_FIELDS[name](p) for p in parts)
    target = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if target is int:
            return int(value)
        if target is float:
            return float(value)
    except ValueError as exc:
        raise ConfigurationError(f"config key {name}: {exc}") from exc
    return value


def read_config_file(path: str) -> dict:
    if not os.path.isfile(path):
        raise ConfigurationError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)
    if CONFIG_SECTION not in parser:
        raise ConfigurationError(f"config file {path} lacks a [{CONFIG_SECTION}] section")
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for key, value in parser[CONFIG_SECTION].items():
        if key not in known:
            raise ConfigurationError(f"unknown config key {key!r} in {path}")
        out[key] = _convert(key, value)
    return out


def build_run_config(config_file: str | None = None, **overrides) -> RunConfig:
    """Merge defaults, preset, file values, and flag overrides (in that order)."""
    values = {f.name: f.default for f in fields(RunConfig)}
    file_values = read_config_file(config_file) if config_file else {}
    flag_values = {k: v for k, v in overrides.items() if v is not None}

    preset = flag_values.get("preset", file_values.get("preset", values["preset"]))
    if preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    values.update(PRESETS[preset])
    values["preset"] = preset
    values.update(file_values)
    values.update(flag_values)

    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    strategy_for_id(cfg.strategy)
    if cfg.augmentations:
        raise ConfigurationError(
            f"auxiliary augmentations are prohibited in this protocol: {cfg.augmentations}")
    if len(cfg.mixture_ratios) != 4 or abs(sum(cfg.mixture_ratios) - 1.0) > 1e-12:
        raise ConfigurationError(f"mixture_ratios must be 4 values summing to 1, "
                                 f"got {cfg.mixture_ratios}")
    unknown = set(cfg.report_formats) - {"tsv", "markdown"}
    if unknown:
        raise ConfigurationError(f"unknown report formats: {sorted(unknown)}")
    if cfg.probe_count < 0 or cfg.checkpoint_every <= 0:
        raise ConfigurationError("probe_count must be >= 0 and checkpoint_every > 0")
    cfg.training_config()  # validates the schedule fields


def format_config(cfg: RunConfig) -> str:
    lines = []
    for f in sorted(fields(RunConfig), key=lambda f: f.name):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines)
