"""Run-configuration schema: validation, defaults, canonical echo.

A run config is one JSON document with blocks for the potential, the grid,
the run parameters, tolerance overrides, and output location.  Validation is
strict: unknown keys are rejected with their dotted path, and every default is
materialized into the echoed config so reports are self-describing.
"""

from __future__ import annotations

import copy
import hashlib
import json

from .errors import ConfigError
from .experiments import DEFAULT_TOLERANCES, EXPERIMENTS

_POTENTIAL_DEFAULTS = {
    "kind": "cosine-mixture",
    "level": 0.0,
    "j_terms": 3,
    "amp_max": 0.5,
    "wavenumber_lo": 0.5,
    "wavenumber_hi": 2.5,
    "bump_rate": 0.8,
    "bump_width": 1.0,
    "bump_amp_lo": -0.8,
    "bump_amp_hi": 0.8,
    "master_seed": 20230,
}

_GRID_DEFAULTS = {
    "h": 0.04,
    "halfwidth": 12.0,
}

_RUN_DEFAULTS = {
    "m": 0,
    "x": 0.0,
    "v": 0.0,
    "horizon": 12,
    "velocity_time": 2,
    "velocity_horizon": 14,
    "horizons": [12, 20, 28],
    "kappas": [0.4, 0.2, 0.1, 0.05],
    "velocities": [-1.0, -0.5, 0.0, 0.5, 1.0],
    "concentration_kappas": [0.0, 0.2],
    "n_list": [12, 25, 50, 100],
    "shape_n": 100,
    "shape_kappas": [0.2],
    "seeds": 32,
    "anchors": [[0, 2.0], [0, -1.0]],
    "sources": [[0, -1.0], [0, 1.0]],
    "overlap_kappa": 0.5,
    "weight_halfwidth": 5.0,
}

_TOP_DEFAULTS = {
    "experiments": ["all"],
    "output_dir": "kickflow-out",
}

_NUMERIC = (int, float)


def _check_type(path, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be a boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, _NUMERIC):
            raise ConfigError(f"{path} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path} must be a list, got {value!r}")
        return copy.deepcopy(value)
    raise ConfigError(f"{path} has unsupported type")


def _merge_block(path, raw, defaults):
    if raw is None:
        return copy.deepcopy(defaults)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must be an object, got {raw!r}")
    out = copy.deepcopy(defaults)
    for key, value in raw.items():
        if key not in defaults:
            raise ConfigError(f"unknown key {path}.{key}")
        out[key] = _check_type(f"{path}.{key}", value, defaults[key])
    return out


def validate_config(raw: dict) -> dict:
    """Validate a raw config dict and materialize every default."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known_top = {"experiments", "potential", "grid", "run", "tolerances", "output_dir"}
    for key in raw:
        if key not in known_top:
            raise ConfigError(f"unknown key {key}")

    cfg = {}
    exps = raw.get("experiments", _TOP_DEFAULTS["experiments"])
    if isinstance(exps, str):
        exps = [exps]
    if not isinstance(exps, list) or not all(isinstance(e, str) for e in exps):
        raise ConfigError("experiments must be a list of experiment names")
    for e in exps:
        if e != "all" and e not in EXPERIMENTS:
            raise ConfigError(f"experiments: unknown experiment {e!r} "
                              f"(known: {', '.join(sorted(EXPERIMENTS))})")
    cfg["experiments"] = exps

    cfg["potential"] = _merge_block("potential", raw.get("potential"), _POTENTIAL_DEFAULTS)
    cfg["grid"] = _merge_block("grid", raw.get("grid"), _GRID_DEFAULTS)
    if not (cfg["grid"]["h"] > 0):
        raise ConfigError(f"grid.h must be positive, got {cfg['grid']['h']}")
    if not (cfg["grid"]["halfwidth"] > 0):
        raise ConfigError(f"grid.halfwidth must be positive, got {cfg['grid']['halfwidth']}")
    cfg["run"] = _merge_block("run", raw.get("run"), _RUN_DEFAULTS)
    cfg["tolerances"] = _merge_block("tolerances", raw.get("tolerances"), DEFAULT_TOLERANCES)

    outdir = raw.get("output_dir", _TOP_DEFAULTS["output_dir"])
    if not isinstance(outdir, str):
        raise ConfigError(f"output_dir must be a string, got {outdir!r}")
    cfg["output_dir"] = outdir
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:10]


def selected_experiments(cfg: dict) -> list:
    names = cfg["experiments"]
    if "all" in names:
        return list(EXPERIMENTS)
    return list(dict.fromkeys(names))
