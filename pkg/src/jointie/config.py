"""TOML run configuration.

Top-level keys map onto :class:`TrainingConfig` (``model``, ``window_length``,
``stride``, ``epochs``, ``batch_size``, ``learning_rate``, ``loss_mode``,
``seed``, ...); encoder sizes live in an ``[encoder]`` table.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .training import EncoderSettings, TrainingConfig


class ConfigError(ValueError):
    pass


_TOP = {f.name for f in dataclasses.fields(TrainingConfig)} - {"encoder"}
_ENC = {f.name for f in dataclasses.fields(EncoderSettings)}


def build_config(values: dict | None = None, overrides: dict | None = None) -> TrainingConfig:
    """Merge file values with overrides (``None`` overrides are ignored)."""
    values = dict(values or {})
    encoder = dict(values.pop("encoder", {}) or {})
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key.startswith("encoder."):
            encoder[key.split(".", 1)[1]] = val
        else:
            values[key] = val
    unknown = set(values) - _TOP
    unknown |= {f"encoder.{k}" for k in set(encoder) - _ENC}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return TrainingConfig(**values, encoder=EncoderSettings(**encoder))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, overrides: dict | None = None) -> TrainingConfig:
    values = {}
    if path is not None:
        try:
            values = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return build_config(values, overrides)


def dump_config(config: TrainingConfig) -> str:
    d = config.to_dict()
    enc = d.pop("encoder")
    lines = [f"{k} = {_toml_value(v)}" for k, v in d.items()]
    lines.append("")
    lines.append("[encoder]")
    lines += [f"{k} = {_toml_value(v)}" for k, v in enc.items()]
    return "\n".join(lines) + "\n"


def _toml_value(v):
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v)
