"""Run configuration: strict TOML loading with full upfront validation.

One config file fully determines a run.  Unknown keys are rejected and
error messages name the offending key, so typos fail fast instead of
silently falling back to defaults.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .errors import ConfigurationError
from .grid import CATALOG_IDS


@dataclass
class RunConfig:
    a: float = -1.0
    b: float = 1.0
    n_cells: int = 256
    s: float = 0.5
    p: float = 2.0
    catalog: str = "CAT-B"
    tol_u: float | None = None
    tol: float = 1e-8
    max_sweeps: int = 100_000
    theta_variant: str = "ramp"
    warm_start: bool = True
    omega: str | float = "auto"
    bootstrap: bool = True
    eps: float | None = None
    eps_list: list[float] = field(default_factory=list)
    s_list: list[float] = field(default_factory=list)
    sigma: float = 1.0
    r: float | None = None
    window_policy: str = "auto"
    out_format: str = "json"
    out_dir: str = "out"
    seed: int = 42

    def resolved_r(self) -> float:
        # default difference order: 0.5 toward sigma = 1, sigma - 0.2 below
        if self.r is not None:
            return self.r
        return 0.5 if self.sigma == 1.0 else max(self.sigma - 0.2, 0.0)


_SCHEMA = {
    "domain": {"a": float, "b": float},
    "grid": {"n_cells": int},
    "frac": {"s": float, "p": float},
    "problem": {"catalog": str, "tol_u": float},
    "solver": {
        "tol": float,
        "max_sweeps": int,
        "theta_variant": str,
        "warm_start": bool,
        "omega": (str, float),
        "bootstrap": bool,
    },
    "penalty": {"eps": float, "eps_list": list},
    "study": {"s_list": list, "sigma": float, "r": float, "window_policy": str},
    "output": {"format": str, "dir": str},
    "check": {"seed": int},
}

_DEST = {
    ("domain", "a"): "a",
    ("domain", "b"): "b",
    ("grid", "n_cells"): "n_cells",
    ("frac", "s"): "s",
    ("frac", "p"): "p",
    ("problem", "catalog"): "catalog",
    ("problem", "tol_u"): "tol_u",
    ("solver", "tol"): "tol",
    ("solver", "max_sweeps"): "max_sweeps",
    ("solver", "theta_variant"): "theta_variant",
    ("solver", "warm_start"): "warm_start",
    ("solver", "omega"): "omega",
    ("solver", "bootstrap"): "bootstrap",
    ("penalty", "eps"): "eps",
    ("penalty", "eps_list"): "eps_list",
    ("study", "s_list"): "s_list",
    ("study", "sigma"): "sigma",
    ("study", "r"): "r",
    ("study", "window_policy"): "window_policy",
    ("output", "format"): "out_format",
    ("output", "dir"): "out_dir",
    ("check", "seed"): "seed",
}


def _coerce(section: str, key: str, value, expected):
    kinds = expected if isinstance(expected, tuple) else (expected,)
    for kind in kinds:
        if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if kind is int and isinstance(value, int) and not isinstance(value, bool):
            return value
        if kind is bool and isinstance(value, bool):
            return value
        if kind is str and isinstance(value, str):
            return value
        if kind is list and isinstance(value, list):
            return [float(v) for v in value]
    raise ConfigurationError(f"config key {section}.{key} has invalid type {type(value).__name__}")


def _validate(cfg: RunConfig) -> None:
    if cfg.b <= cfg.a:
        raise ConfigurationError("config key domain.b must exceed domain.a")
    if cfg.n_cells < 4:
        raise ConfigurationError("config key grid.n_cells must be at least 4")
    if not (0.0 < cfg.s <= 1.0):
        raise ConfigurationError(f"config key frac.s must lie in (0, 1], got {cfg.s}")
    if not (1.0 < cfg.p < math.inf):
        raise ConfigurationError(f"config key frac.p must lie in (1, inf), got {cfg.p}")
    if cfg.catalog not in CATALOG_IDS:
        raise ConfigurationError(f"config key problem.catalog must be one of {', '.join(CATALOG_IDS)}")
    if cfg.tol <= 0.0:
        raise ConfigurationError("config key solver.tol must be positive")
    if cfg.max_sweeps < 1:
        raise ConfigurationError("config key solver.max_sweeps must be positive")
    if cfg.theta_variant not in ("ramp", "smoothstep"):
        raise ConfigurationError("config key solver.theta_variant must be 'ramp' or 'smoothstep'")
    if isinstance(cfg.omega, str):
        if cfg.omega != "auto":
            raise ConfigurationError("config key solver.omega must be 'auto' or a float in (0, 2)")
    elif not (0.0 < cfg.omega < 2.0):
        raise ConfigurationError("config key solver.omega must lie in (0, 2)")
    if cfg.eps is not None and cfg.eps <= 0.0:
        raise ConfigurationError("config key penalty.eps must be positive")
    if any(e <= 0.0 for e in cfg.eps_list):
        raise ConfigurationError("config key penalty.eps_list entries must be positive")
    if any(not (0.0 < s < 1.0) for s in cfg.s_list):
        raise ConfigurationError("config key study.s_list entries must lie in (0, 1)")
    if not (0.0 < cfg.sigma <= 1.0):
        raise ConfigurationError("config key study.sigma must lie in (0, 1]")
    if cfg.r is not None and not (0.0 <= cfg.r < 1.0):
        raise ConfigurationError("config key study.r must lie in [0, 1)")
    if cfg.window_policy not in ("auto", "window", "full"):
        raise ConfigurationError("config key study.window_policy must be auto, window, or full")
    if cfg.out_format not in ("csv", "json", "both"):
        raise ConfigurationError("config key output.format must be csv, json, or both")


def load_config(path) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = _toml.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    except _toml.TOMLDecodeError as exc:
        raise ConfigurationError(f"malformed TOML in {path}: {exc}") from exc
    cfg = RunConfig()
    for section, entries in raw.items():
        if section not in _SCHEMA:
            raise ConfigurationError(f"unknown config section {section!r}")
        if not isinstance(entries, dict):
            raise ConfigurationError(f"config section {section!r} must be a table")
        for key, value in entries.items():
            if key not in _SCHEMA[section]:
                raise ConfigurationError(f"unknown config key {section}.{key}")
            setattr(cfg, _DEST[(section, key)], _coerce(section, key, value, _SCHEMA[section][key]))
    _validate(cfg)
    return cfg
