"""Flat ``key = value`` run configuration files.

Blank lines and ``#`` comments are ignored.  Keys cover every
:class:`~lgan.training.TrainConfig` field plus the dataset and architecture
fields of :class:`RunConfig`; anything else is rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .data import Dataset, load_csv, load_idx_dataset, make_circle, make_two_moons
from .training import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    # dataset
    dataset: str = "circle"  # circle | two_moons | csv | idx
    n_points: int = 1000  # circle: points; two_moons: points per class
    radius: float = 1.0
    noise_sd: float = 0.02
    data_seed: int = 0
    data_path: str = ""
    labels_path: str = ""
    has_labels: bool = False
    labels_per_class: int = 3
    validation_per_class: int = 0
    # architecture
    coord_dim: int = 1
    gen_hidden: tuple[int, ...] = (64, 64)
    gen_activation: str = "tanh"
    disc_hidden: tuple[int, ...] = (128, 128)
    disc_activation: str = "leaky_relu"
    clf_hidden: tuple[int, ...] = (128, 128)
    clf_activation: str = "leaky_relu"
    model_seed: int = 0


_TRAIN_FIELDS = {f.name: f for f in fields(TrainConfig)}
_RUN_FIELDS = {f.name: f for f in fields(RunConfig) if f.name != "train"}


def _parse_value(key: str, text: str, default: Any, annotation: str) -> Any:
    text = text.strip()
    try:
        if "tuple" in annotation:
            return tuple(int(p) for p in text.split(",") if p.strip())
        if "None" in annotation and text.lower() in ("none", ""):
            return None
        if "bool" in annotation:
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if "int" in annotation:
            return int(text)
        if "float" in annotation:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value {text!r} for {key} ({annotation})") from None


def parse_config(text: str) -> RunConfig:
    train_kw: dict[str, Any] = {}
    run_kw: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in _TRAIN_FIELDS:
            f = _TRAIN_FIELDS[key]
            train_kw[key] = _parse_value(key, value, f.default, str(f.type))
        elif key in _RUN_FIELDS:
            f = _RUN_FIELDS[key]
            run_kw[key] = _parse_value(key, value, f.default, str(f.type))
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    try:
        return RunConfig(train=TrainConfig(**train_kw), **run_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text())


def format_config(cfg: RunConfig) -> str:
    """Render every field; ``parse_config(format_config(c)) == c``."""

    def fmt(v: Any) -> str:
        if isinstance(v, tuple):
            return ",".join(str(i) for i in v)
        if v is None:
            return "none"
        if isinstance(v, bool):
            return "true" if v else "false"
        return repr(v) if isinstance(v, float) else str(v)

    lines = [f"{k} = {fmt(v)}" for k, v in dataclasses.asdict(cfg.train).items()]
    lines += [f"{k} = {fmt(getattr(cfg, k))}" for k in _RUN_FIELDS]
    return "\n".join(lines) + "\n"


def build_dataset(cfg: RunConfig, split: str = "train") -> Dataset:
    """Materialize the configured dataset.

    Synthetic sets draw the validation split from a stream seeded
    ``data_seed + 1`` so it never overlaps the training draw.
    """
    seed = cfg.data_seed + (1 if split == "validation" else 0)
    rng = np.random.default_rng(seed)
    if cfg.dataset == "circle":
        return make_circle(cfg.n_points, cfg.radius, cfg.noise_sd, rng)
    if cfg.dataset == "two_moons":
        n = cfg.n_points if split == "train" else cfg.validation_per_class
        return make_two_moons(n, cfg.noise_sd, rng)
    if split == "validation":
        raise ConfigError(f"no validation split for dataset {cfg.dataset!r}")
    if cfg.dataset == "csv":
        return load_csv(cfg.data_path, cfg.has_labels)
    if cfg.dataset == "idx":
        return load_idx_dataset(cfg.data_path, cfg.labels_path or None)
    raise ConfigError(f"unknown dataset {cfg.dataset!r}")
