"""Declarative config files: TOML sections named after CLI subcommands.

Precedence is flag > config file > built-in default, resolved per key.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Mapping

from .core import DataFormatError

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml


def load_config(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            obj = _toml.load(fh)
    except _toml.TOMLDecodeError as exc:
        raise DataFormatError(f"{path}: invalid config: {exc}") from exc
    if not isinstance(obj, dict):
        raise DataFormatError(f"{path}: config must be a table")
    return obj


def resolve(
    flag_value: Any,
    config: Mapping[str, Any],
    section: str,
    key: str,
    default: Any,
) -> Any:
    """Pick the effective value for one setting."""
    if flag_value is not None:
        return flag_value
    sec = config.get(section)
    if isinstance(sec, Mapping) and key in sec:
        return sec[key]
    return default
