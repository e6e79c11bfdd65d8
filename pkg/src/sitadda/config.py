"""TOML run configuration with CLI flag overrides.

Flags beat file values; file values beat defaults. Section readers
reject unknown keys so typos fail loudly instead of silently running
with defaults.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def load_toml(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML ({exc})") from exc


def section(cfg: dict | None, name: str, allowed: set[str]) -> dict:
    """Extract one table, validating key names."""
    if cfg is None:
        return {}
    table = cfg.get(name, {})
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table, got {type(table).__name__}")
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(
            f"unknown keys in [{name}]: {sorted(unknown)} (allowed: {sorted(allowed)})"
        )
    return dict(table)


def merge(file_values: dict, overrides: dict[str, Any]) -> dict:
    """Apply non-None CLI overrides on top of file values."""
    out = dict(file_values)
    for key, value in overrides.items():
        if value is not None:
            out[key] = value
    return out


def require(cfg: dict, key: str, context: str) -> Any:
    if key not in cfg or cfg[key] is None:
        raise ConfigError(f"{context}: missing required setting {key!r}")
    return cfg[key]
