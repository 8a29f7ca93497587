"""Flat ``key=value`` run configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .exceptions import ConfigError


@dataclass
class RunConfig:
    # data and outputs
    dataset: str = ""
    output_dir: str = "runs/latest"
    seed: int = 0
    # edge separation
    separation: str = "causal"
    k_se: int = 8
    d_z: int = 32
    h_g: int = 32
    nonedge_per_node: int = 5
    sep_epochs: int = 300
    sep_lr: float = 0.01
    refine: bool = False
    # hybrid filters
    layers: int = 2
    hidden: int = 64
    alpha: float = 1.0
    branches: str = "both"
    # head and training
    head_hidden: int = 64
    residual: bool = True
    class_weight: bool = False
    lr: float = 0.01
    epochs: int = 200
    weight_decay: float = 5e-4
    split_ratios: tuple = (0.4, 0.2, 0.4)
    # pipeline grid over the high-pass strength; empty runs ``alpha`` only
    alpha_grid: tuple = ()
    # synthetic data and the energy-shift experiment
    n_nodes: int = 500
    ba_m: int = 2
    anomaly_ratio: float = 0.1
    sigma: float = 2.0
    rewire: int = 2
    n_features: int = 16
    ratio_grid: tuple = (0.0, 0.05, 0.10, 0.20)
    n_seeds: int = 10

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.separation not in ("causal", "labels", "none"):
            raise ConfigError(f"separation must be causal, labels or none, got {self.separation!r}")
        if self.branches not in ("both", "low", "high"):
            raise ConfigError(f"branches must be both, low or high, got {self.branches!r}")
        if len(self.split_ratios) != 3 or abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError("split_ratios must be three numbers summing to 1")
        for a in (self.alpha, *self.alpha_grid):
            if not 0.0 < a <= 2.0:
                raise ConfigError(f"high-pass strength must lie in (0, 2], got {a}")
        for name in ("layers", "hidden", "head_hidden", "h_g", "d_z", "n_nodes", "ba_m", "n_features", "n_seeds"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("k_se", "nonedge_per_node", "epochs", "sep_epochs", "rewire"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def with_overrides(self, pairs: dict) -> "RunConfig":
        known = {f.name: f for f in fields(self)}
        changes = {}
        for key, raw in pairs.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            changes[key] = _coerce(key, raw, getattr(self, key))
        return self.replace(**changes)

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        return cls().with_overrides(parse_pairs(text.splitlines(), source))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
        return cls.from_text(text, str(path))

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}

    def to_text(self) -> str:
        lines = []
        for key, value in dataclasses.asdict(self).items():
            lines.append(f"{key}={_format(value)}")
        return "\n".join(lines) + "\n"


def parse_pairs(lines, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(_format(v) for v in value)
    return str(value)


def _coerce(key: str, raw, default):
    if not isinstance(raw, str):
        return raw
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(s) for s in raw.split(",") if s.strip())
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw
