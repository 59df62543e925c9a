"""Run configuration: dataclass, `key = value` files, canonical hashing.

Precedence when assembling a config is flag > config file > default.
The config hash covers the model-relevant fields only (paths and thread
counts are excluded), so the same experiment hashed on two machines
matches.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace

DTGA_INPUT_MODES = ("ff", "bb", "fb", "avg")
HEAD_KINDS = ("linear", "nonlinear")


class ConfigError(ValueError):
    """A config file or field failed validation."""


@dataclass
class TrainConfig:
    d: int = 512
    alpha: float = 0.2
    lambda_g: float = 10.0
    lr0: float = 0.0002
    decay_factor: float = 0.7
    decay_every: int = 20
    epochs: int = 50
    batch_size: int = 100
    heads: int = 2
    seed: int = 42
    dtga_inputs: str = "fb"
    no_dtga: bool = False
    no_ifa: bool = False
    no_iga: bool = False
    ifa_head: str = "linear"
    iga_head: str = "nonlinear"
    val_fraction: float = 0.2
    threads: int = 1

    # fields that do not alter the trained function
    _UNHASHED = ("threads",)

    def validate(self):
        if self.d <= 0 or self.d % 2 != 0:
            raise ConfigError(f"d must be positive and even, got {self.d}")
        if self.heads < 1 or self.d % self.heads != 0:
            raise ConfigError(f"heads must divide d: d={self.d} heads={self.heads}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.lambda_g < 0.0:
            raise ConfigError(f"lambda_g must be >= 0, got {self.lambda_g}")
        if self.lr0 <= 0.0:
            raise ConfigError(f"lr0 must be positive, got {self.lr0}")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ConfigError(f"decay_factor must lie in (0, 1], got {self.decay_factor}")
        if self.decay_every < 1:
            raise ConfigError(f"decay_every must be >= 1, got {self.decay_every}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.dtga_inputs not in DTGA_INPUT_MODES:
            raise ConfigError(f"dtga_inputs must be one of {DTGA_INPUT_MODES}, "
                              f"got {self.dtga_inputs!r}")
        if self.ifa_head not in HEAD_KINDS or self.iga_head not in HEAD_KINDS:
            raise ConfigError("ifa_head/iga_head must be 'linear' or 'nonlinear'")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must lie in [0, 1), got {self.val_fraction}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        return self


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(field_type: type, raw: str, key: str):
    raw = raw.strip()
    if field_type is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"cannot parse boolean {key} = {raw!r}")
    try:
        if field_type is int:
            return int(raw)
        if field_type is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {raw!r}") from None
    return raw


def config_to_text(cfg: TrainConfig) -> str:
    """Canonical `key = value` rendering, one field per line, sorted."""
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}"
             for f in sorted(fields(cfg), key=lambda f: f.name)]
    return "\n".join(lines) + "\n"


def parse_config_text(text: str, base: TrainConfig | None = None) -> TrainConfig:
    """Parse `key = value` lines over ``base`` (defaults if omitted).

    Unknown keys are rejected -- a typo must never silently fall back to a
    default.
    """
    types = {"d": int, "alpha": float, "lambda_g": float, "lr0": float,
             "decay_factor": float, "decay_every": int, "epochs": int,
             "batch_size": int, "heads": int, "seed": int,
             "dtga_inputs": str, "no_dtga": bool, "no_ifa": bool,
             "no_iga": bool, "ifa_head": str, "iga_head": str,
             "val_fraction": float, "threads": int}
    cfg = base if base is not None else TrainConfig()
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        overrides[key] = _parse_value(types[key], raw, key)
    return replace(cfg, **overrides)


def load_config_file(path: str, base: TrainConfig | None = None) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


def config_hash(cfg: TrainConfig) -> str:
    """sha256 over the canonical text of the hashed fields."""
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}"
             for f in sorted(fields(cfg), key=lambda f: f.name)
             if f.name not in TrainConfig._UNHASHED]
    digest = hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()
    return digest
