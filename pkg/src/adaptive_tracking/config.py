"""Experiment configuration: one JSON tree, strictly validated.

Every section maps onto a frozen dataclass.  Decoding walks the dataclass type
hints, so unknown keys and wrongly typed values are rejected with the dotted
path of the offending entry.  Non-finite floats are written as the strings
"inf", "-inf" and "nan" so the file stays plain JSON.
"""

from __future__ import annotations

import dataclasses
import json
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, List, Tuple

from .harness import SCENARIO_NAMES, HarnessConfig
from .planner import MODES, EstimatorConfig, OcpConfig
from .plant import PlantConfig


class ConfigError(ValueError):
    """Raised for any malformed, unknown or inconsistent configuration entry."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: Tuple[str, ...] = SCENARIO_NAMES
    modes: Tuple[str, ...] = MODES
    seed: int = 0
    output_dir: str = "results"
    emit_plot_data: bool = True
    workers: int = 1
    plant: PlantConfig = field(default_factory=PlantConfig)
    planner: OcpConfig = field(default_factory=OcpConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)

    def __post_init__(self):
        if not self.scenarios:
            raise ConfigError("scenarios: at least one scenario is required")
        for name in self.scenarios:
            if name not in SCENARIO_NAMES:
                raise ConfigError(f"scenarios: unknown scenario {name!r}; "
                                  f"built-in scenarios are {', '.join(SCENARIO_NAMES)}")
        if not self.modes:
            raise ConfigError("modes: at least one planner mode is required")
        for m in self.modes:
            if m not in MODES:
                raise ConfigError(f"modes: unknown planner mode {m!r}; expected one of {MODES}")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")
        if abs(self.planner.dt - self.plant.planner_period) > 1e-12:
            raise ConfigError("planner.dt must equal plant.planner_period")
        if abs(self.planner.wheel_radius - self.plant.wheel_radius) > 1e-12:
            raise ConfigError("planner.wheel_radius must equal plant.wheel_radius")


# --------------------------------------------------------------------------
# Encoding
# --------------------------------------------------------------------------

def _encode(value):
    if dataclasses.is_dataclass(value):
        return {f.name: _encode(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(k): _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def to_dict(cfg: ExperimentConfig) -> dict:
    return _encode(cfg)


def dumps(cfg: ExperimentConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2) + "\n"


# --------------------------------------------------------------------------
# Decoding
# --------------------------------------------------------------------------

_NONFINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _decode(tp, value, path: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if dataclasses.is_dataclass(tp):
        return _decode_dataclass(tp, value, path)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _decode(inner[0], value, path)
    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_decode(args[0], v, f"{path}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"{path}: expected {len(args)} entries, got {len(value)}")
        return tuple(_decode(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
        return {str(k): v for k, v in value.items()}
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, str) and value in _NONFINITE:
            return _NONFINITE[value]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported field type {tp!r}")


def _decode_dataclass(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown key(s): {', '.join(where + k for k in unknown)}")
    kwargs = {}
    for name in names & set(data):
        sub = f"{path}.{name}" if path else name
        kwargs[name] = _decode(hints[name], data[name], sub)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def from_dict(data: dict) -> ExperimentConfig:
    return _decode_dataclass(ExperimentConfig, data, "")


def loads(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return from_dict(data)


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return loads(text)


# --------------------------------------------------------------------------
# Overrides
# --------------------------------------------------------------------------

def parse_override(item: str) -> Tuple[List[str], Any]:
    """``section.key=value``; the value is read as JSON, falling back to a bare string."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    keys = [k for k in key.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override {item!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return keys, value


def apply_overrides(cfg: ExperimentConfig, items: Iterable[str]) -> ExperimentConfig:
    data = to_dict(cfg)
    for item in items:
        keys, value = parse_override(item)
        node = data
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ConfigError(f"override {item!r}: unknown key {'.'.join(keys)}")
            node = node[k]
        # free-form mappings (harness.profiles) may gain new keys
        open_map = keys[:-1] == ["harness", "profiles"]
        if not isinstance(node, dict) or (keys[-1] not in node and not open_map):
            raise ConfigError(f"override {item!r}: unknown key {'.'.join(keys)}")
        node[keys[-1]] = value
    return from_dict(data)


def flatten(cfg: ExperimentConfig) -> List[Tuple[str, Any]]:
    """(dotted key, JSON value) pairs in declaration order, for summary headers."""
    out: List[Tuple[str, Any]] = []

    def walk(prefix, node):
        if isinstance(node, dict) and node:
            for k, v in node.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        else:
            out.append((prefix, node))

    walk("", to_dict(cfg))
    return out


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


__all__ = ["ConfigError", "ExperimentConfig", "apply_overrides",
           "default_config", "dumps", "flatten", "from_dict", "load", "loads", "parse_override",
           "to_dict"]
