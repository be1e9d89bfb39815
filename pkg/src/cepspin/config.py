"""Run configuration from TOML files and command-line overrides."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .collective_model import (PresetParams, SpinModelSpec, build_example_model,
                               preset_from_mapping, spec_from_custom)
from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_SECTIONS = {"model", "sweep", "solver", "husimi", "spinboson"}
_SWEEP_KEYS = {"S_list", "delta_min", "delta_max", "delta_points", "log_spacing"}
_SOLVER_KEYS = {"max_spin", "dense_limit", "method", "threads"}
_HUSIMI_KEYS = {"n_theta", "n_phi", "tangent_points"}
_SPINBOSON_KEYS = {"g", "lam", "omega", "kappa"}


@dataclass
class RunConfig:
    model: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    husimi: dict = field(default_factory=dict)
    spinboson: dict = field(default_factory=dict)

    def preset(self) -> PresetParams:
        section = {k: v for k, v in self.model.items() if k != "custom"}
        try:
            return preset_from_mapping(section)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"[model]: {exc}") from exc

    def spec(self) -> SpinModelSpec:
        """Custom model if ``[model.custom]`` is present, else the preset model."""
        if "custom" in self.model:
            try:
                return spec_from_custom(self.model["custom"])
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"[model.custom]: {exc}") from exc
        return build_example_model(self.preset())

    def delta_grid(self) -> np.ndarray:
        s = self.sweep
        try:
            lo, hi, n = float(s["delta_min"]), float(s["delta_max"]), int(s["delta_points"])
        except KeyError as exc:
            raise ConfigError(f"[sweep] is missing {exc}") from exc
        if n < 1:
            raise ConfigError("[sweep] delta_points must be positive")
        if s.get("log_spacing", False):
            if lo <= 0:
                raise ConfigError("[sweep] log spacing needs delta_min > 0")
            return np.logspace(np.log10(lo), np.log10(hi), n)
        return np.linspace(lo, hi, n)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in sorted(_SECTIONS)}

    def sha256(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=_jsonable).encode()
        return hashlib.sha256(blob).hexdigest()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj).__name__)


def _check_keys(name: str, section: dict, allowed: set):
    if not isinstance(section, dict):
        raise ConfigError(f"[{name}] must be a table")
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"unknown [{name}] keys: {sorted(extra)}")


def validate(cfg: RunConfig) -> RunConfig:
    _check_keys("sweep", cfg.sweep, _SWEEP_KEYS)
    _check_keys("solver", cfg.solver, _SOLVER_KEYS)
    _check_keys("husimi", cfg.husimi, _HUSIMI_KEYS)
    _check_keys("spinboson", cfg.spinboson, _SPINBOSON_KEYS)
    if cfg.model:
        if "custom" in cfg.model:
            cfg.spec()
        else:
            cfg.preset()
    method = cfg.solver.get("method", "auto")
    if method not in {"auto", "dense_null", "sparse_lu"}:
        raise ConfigError(f"[solver] unknown method {method!r}")
    return cfg


def load_config(path) -> RunConfig:
    try:
        data = tomllib.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    unknown = set(data) - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return validate(RunConfig(**{k: dict(data.get(k, {})) for k in _SECTIONS}))
