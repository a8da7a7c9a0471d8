"""Run configuration: a flat YAML mapping of documented keys.

Every key has an explicit default (some depend on ``case``); unknown keys,
wrong types and invariant violations raise :class:`ConfigError` naming the key.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .exceptions import ConfigError
from .models import make_model
from .utils import is_power_of_two

CASE_DEFAULTS = {
    # omega_carrier * t_f from 6 pi to 100 pi, log-spaced
    "two_level": {"tf_min": 6 * math.pi, "tf_max": 100 * math.pi, "tf_steps": 12,
                  "tf_spacing": "log"},
    "single_transport": {"a": 1e5, "d": 1562.0, "tf_min": 12.0, "tf_max": 40.0, "tf_steps": 12},
    "two_ion": {"a": 1e5, "d": 100.0, "coulomb": 64000.0, "tf_min": 4.0, "tf_max": 12.0,
                "tf_steps": 12},
}


@dataclass
class RunConfig:
    """All inputs of a run. Lengths in sigma, times in 1/omega, energies in hbar omega."""

    case: str = "single_transport"
    # physics
    a: Optional[float] = None
    d: Optional[float] = None
    coulomb: Optional[float] = None
    mass_total: float = 2.0
    omega_carrier: float = 1.0
    # eSTA
    n_modes: int = 1
    quad_rtol: float = 1e-8
    # sweep
    tf_min: Optional[float] = None
    tf_max: Optional[float] = None
    tf_steps: Optional[int] = None
    tf_grid: Optional[list] = None
    tf_spacing: Optional[str] = None
    threshold_level: float = 0.99
    # numerics
    frame: str = "comoving"
    max_spacing: float = 0.25
    pad: float = 10.0
    dt: Optional[float] = None
    rel_points: int = 128
    rel_half_width: float = 12.0
    two_level_tol: float = 1e-10
    workers: int = 1
    # output
    out: Optional[str] = None
    format: str = "csv"
    validate_level: str = "fast"
    verbosity: int = 0
    extra: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for key, value in CASE_DEFAULTS.get(self.case, {}).items():
            if getattr(self, key) is None:
                if self.case == "two_level" and key in ("tf_min", "tf_max") and \
                        isinstance(self.omega_carrier, (int, float)) and self.omega_carrier > 0:
                    value = value / self.omega_carrier
                setattr(self, key, value)
        if self.tf_spacing is None:
            self.tf_spacing = "linear"
        self.validate()

    def validate(self):
        if self.case not in CASE_DEFAULTS:
            raise ConfigError(f"case: unknown case {self.case!r}, expected one of "
                              f"{sorted(CASE_DEFAULTS)}")
        for key in ("a", "d", "coulomb"):
            value = getattr(self, key)
            if value is not None:
                _positive(key, value)
        for key in ("mass_total", "omega_carrier", "quad_rtol", "max_spacing", "pad", "rel_half_width",
                    "two_level_tol", "threshold_level"):
            _positive(key, getattr(self, key))
        if self.dt is not None:
            _positive("dt", self.dt)
        for key in ("n_modes", "workers", "tf_steps"):
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{key}: expected a positive integer, got {value!r}")
        if not is_power_of_two(self.rel_points):
            raise ConfigError(f"rel_points: {self.rel_points} is not a power of two")
        if self.tf_spacing not in ("linear", "log"):
            raise ConfigError(f"tf_spacing: expected 'linear' or 'log', got {self.tf_spacing!r}")
        if self.frame not in ("comoving", "lab"):
            raise ConfigError(f"frame: expected 'comoving' or 'lab', got {self.frame!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format: expected 'csv' or 'json', got {self.format!r}")
        if self.validate_level not in ("fast", "full"):
            raise ConfigError(f"validate_level: expected 'fast' or 'full', got {self.validate_level!r}")
        grid = self.tf_values()
        if np.any(np.diff(grid) <= 0):
            raise ConfigError("tf_grid: final times must be strictly increasing")
        if np.any(grid <= 0):
            raise ConfigError("tf_grid: final times must be positive")

    def tf_values(self):
        if self.tf_grid is not None:
            return np.asarray(self.tf_grid, dtype=float)
        _positive("tf_min", self.tf_min)
        _positive("tf_max", self.tf_max)
        if self.tf_steps == 1:
            return np.array([float(self.tf_min)])
        if self.tf_max <= self.tf_min:
            raise ConfigError("tf_max: must exceed tf_min")
        if self.tf_spacing == "log":
            return np.geomspace(self.tf_min, self.tf_max, self.tf_steps)
        return np.linspace(self.tf_min, self.tf_max, self.tf_steps)

    def model(self):
        if self.case == "two_level":
            return make_model("two_level", omega_carrier=self.omega_carrier)
        if self.case == "single_transport":
            return make_model("single_transport", a=self.a, d=self.d)
        return make_model("two_ion", a=self.a, d=self.d, coulomb=self.coulomb,
                          mass_total=self.mass_total)

    def to_dict(self):
        out = dataclasses.asdict(self)
        out.pop("extra")
        if out["tf_grid"] is not None:
            out["tf_grid"] = [float(v) for v in out["tf_grid"]]
        return out


def _positive(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or \
            math.isnan(value) or value <= 0:
        raise ConfigError(f"{key}: expected a positive number, got {value!r}")


_FIELD_TYPES = {
    "case": str, "a": float, "d": float, "coulomb": float, "mass_total": float,
    "omega_carrier": float, "n_modes": int, "quad_rtol": float, "tf_min": float,
    "tf_max": float, "tf_steps": int, "tf_grid": list, "tf_spacing": str, "threshold_level": float,
    "frame": str, "max_spacing": float, "pad": float, "dt": float, "rel_points": int, "rel_half_width": float,
    "two_level_tol": float, "workers": int, "out": str, "format": str,
    "validate_level": str, "verbosity": int,
}


def _coerce(key, value):
    kind = _FIELD_TYPES[key]
    if value is None:
        return None
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            # YAML reads "1e5" as a string
            try:
                return float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{key}: expected a number, got {value!r}") from None
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if kind is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list of numbers, got {value!r}")
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a list of numbers, got {value!r}") from None
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string, got {value!r}")
    return value


def config_from_mapping(mapping, source="config"):
    """Build a :class:`RunConfig` from a flat mapping, rejecting unknown keys."""
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigError(f"{source}: top level must be a mapping of keys to values")
    unknown = sorted(set(mapping) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"{source}.{unknown[0]}: unknown key "
                          f"(known keys: {', '.join(sorted(_FIELD_TYPES))})")
    values = {key: _coerce(key, value) for key, value in mapping.items()}
    try:
        return RunConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}.{exc}") from None


def parse_config(path=None, overrides=None):
    """Read a YAML config file (optional) and apply ``overrides`` on top."""
    mapping = {}
    source = "config"
    if path is not None:
        source = str(path)
        try:
            with open(path) as fh:
                mapping = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from None
        if not isinstance(mapping, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    mapping = dict(mapping)
    for key, value in (overrides or {}).items():
        if value is not None:
            mapping[key] = value
    return config_from_mapping(mapping, source)
