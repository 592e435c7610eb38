"""Experiment configuration: defaults, YAML files and command-line overrides.

Precedence, lowest first: built-in defaults, the desk-scale preset (when
enabled), the config file, command-line flags.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .agent import Hyperparams
from .controllers import ControllerKind

DESK_SCALE = {
    "episodes": 300,
    "episode_length": 1800,
    # replay holds 10% of all training episodes at up to one step per 10 s
    "memory_capacity": 30 * 180,
    "checkpoint_every": 8,
}

RHO_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))


class ConfigError(ValueError):
    def __init__(self, key: str, message: str, line: int | None = None, source: str | None = None):
        self.key = key
        self.line = line
        where = f"line {line}" if line is not None else (source or "value")
        super().__init__(f"{key} ({where}): {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    controller: ControllerKind = ControllerKind.DQN
    hyper: Hyperparams = field(default_factory=Hyperparams)
    rho: float = 1.0
    seed: int = 0
    out: Path = Path("runs")
    checkpoint: Path | None = None
    eval_seeds: tuple[int, ...] = (1001, 1002, 1003)
    rho_grid: tuple[float, ...] = RHO_GRID
    desk_scale: bool = False

    @property
    def episodes(self) -> int:
        return self.hyper.episodes

    @property
    def episode_length(self) -> int:
        return self.hyper.episode_length

    def header_fields(self) -> dict:
        return {
            "controller": self.controller.value,
            "seed": self.seed,
            "rho": self.rho,
            "desk_scale": self.desk_scale,
            **self.hyper.to_dict(),
        }


_HYPER_KEYS = set(Hyperparams.field_names())
_TOP_KEYS = {"controller", "rho", "seed", "out", "checkpoint", "eval_seeds", "rho_grid", "desk_scale"}
KNOWN_KEYS = _HYPER_KEYS | _TOP_KEYS
_INT_KEYS = {"batch_size", "episodes", "episode_length", "tau_g", "tau_y", "memory_capacity", "checkpoint_every", "seed"}


def _coerce(key, value, line, source):
    def fail(msg):
        raise ConfigError(key, msg, line, source)

    if value is None:
        if key == "checkpoint":
            return None
        fail("missing value")
    if key == "controller":
        try:
            return ControllerKind(str(value).lower())
        except ValueError:
            fail(f"unknown controller {value!r}; expected one of {[k.value for k in ControllerKind]}")
    if key in ("out", "checkpoint"):
        return Path(str(value))
    if key == "desk_scale":
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        fail(f"expected a boolean, got {value!r}")
    if key in ("eval_seeds", "rho_grid"):
        items = value if isinstance(value, (list, tuple)) else str(value).split(",")
        conv = int if key == "eval_seeds" else float
        try:
            out = tuple(conv(v) for v in items)
        except (TypeError, ValueError):
            fail(f"expected a list of {conv.__name__}s, got {value!r}")
        if not out:
            fail("empty list")
        if key == "rho_grid":
            for r in out:
                if not 0.1 <= r <= 1.0:
                    fail(f"rho {r} outside [0.1, 1]")
        return out
    if key in _INT_KEYS:
        if isinstance(value, bool):
            fail(f"expected an integer, got {value!r}")
        try:
            f = float(value)
        except (TypeError, ValueError):
            fail(f"expected an integer, got {value!r}")
        if f != int(f):
            fail(f"expected an integer, got {value!r}")
        return int(f)
    if isinstance(value, bool):
        fail(f"expected a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        fail(f"expected a number, got {value!r}")


def _read_yaml(path: Path) -> dict[str, tuple[object, int]]:
    """Map of key -> (python value, 1-based line)."""
    text = path.read_text()
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<file>", f"invalid YAML: {exc}", mark.line + 1 if mark else None) from exc
    if node is None:
        return {}
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError("<file>", "top level must be a mapping of key: value", node.start_mark.line + 1)
    loader = yaml.SafeLoader("")
    entries = {}
    for key_node, value_node in node.value:
        key = key_node.value
        line = key_node.start_mark.line + 1
        if key not in KNOWN_KEYS:
            raise ConfigError(key, f"unknown key; expected one of {sorted(KNOWN_KEYS)}", line)
        if key in entries:
            raise ConfigError(key, "duplicate key", line)
        try:
            value = loader.construct_object(value_node, deep=True)
        except yaml.YAMLError as exc:
            raise ConfigError(key, f"cannot parse value: {exc}", line) from exc
        entries[key] = (value, line)
    return entries


def parse_config(file=None, overrides: dict | None = None, desk_scale: bool | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from an optional YAML file plus overrides.

    ``overrides`` holds command-line values keyed like the file (``None``
    entries are ignored). Errors name the offending key and, for file
    values, the line.
    """
    raw: dict[str, tuple[object, int | None, str | None]] = {}
    if file is not None:
        for key, (value, line) in _read_yaml(Path(file)).items():
            raw[key] = (value, line, None)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in KNOWN_KEYS:
            raise ConfigError(key, "unknown key", source="command line")
        raw[key] = (value, None, f"flag --{key.replace('_', '-')}")
    if desk_scale is not None:
        raw["desk_scale"] = (desk_scale, None, "flag --desk-scale")

    values = {key: _coerce(key, v, line, src) for key, (v, line, src) in raw.items()}

    hyper_values = {}
    if values.get("desk_scale", False):
        hyper_values.update(DESK_SCALE)
    hyper_values.update({k: v for k, v in values.items() if k in _HYPER_KEYS})
    try:
        hyper = Hyperparams(**hyper_values)
    except ValueError as exc:
        key = str(exc).split("=", 1)[0]
        line, src = raw.get(key, (None, None, None))[1:]
        raise ConfigError(key, str(exc), line, src) from exc

    top = {k: v for k, v in values.items() if k in _TOP_KEYS}
    if "rho" in top and not 0.1 <= top["rho"] <= 1.0:
        _, line, src = raw["rho"]
        raise ConfigError("rho", f"{top['rho']} outside [0.1, 1]", line, src)
    return ExperimentConfig(hyper=hyper, **top)


def replace(config: ExperimentConfig, **changes) -> ExperimentConfig:
    hyper_changes = {k: changes.pop(k) for k in list(changes) if k in _HYPER_KEYS}
    if hyper_changes:
        changes["hyper"] = dataclasses.replace(config.hyper, **hyper_changes)
    return dataclasses.replace(config, **changes)
