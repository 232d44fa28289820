"""Run configuration: one nested TOML file per run, command-line flags on top.

Precedence (highest first): command-line flag, config file, built-in default.
The built-in model and correlation defaults are the FX case-study set from
:func:`vgfx.model.fx_case_study`.

Sections and keys::

    [model]        kappa_v kappa_d kappa_f a_v a_d a_f sigma_v sigma_d sigma_f
                   theta_s theta_v theta_d theta_f s0 v0 rd0 rf0
    [correlation]  rho_sv rho_sd rho_sf rho_vd rho_vf rho_df
    [subordinator] alpha beta convention            # convention: "rate" | "scale"
    [simulation]   seed paths steps t0 horizon drift_clock truncation clock
                   noise localize workers chunk_size
    [output]       dir format                       # format: "csv" | "bin" | "json"
    [price]        style right strikes lsm_degree   # style: american | european | both
    [converge]     m_values delta_t
    [gof]          bins reference vg_fit sample synthetic
                                                    # reference: normal | vg | both
                                                    # vg_fit: mle | moments
    [compare]      chain results results_style normalizer
"""
from __future__ import annotations

import copy
import dataclasses
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .engine.paths import SimConfig, TimeGrid
from .errors import ConfigError, ParseError
from .model import (CorrelationStructure, LocalizationConfig, ModelParams,
                    SubordinatorParams, fx_case_study)


def _defaults() -> dict:
    p, corr = fx_case_study()
    model = dataclasses.asdict(p)
    correlation = {f.name: getattr(corr, f.name) for f in dataclasses.fields(corr) if f.init}
    return {
        "model": model,
        "correlation": correlation,
        "subordinator": {"alpha": 1.0, "beta": 0.5, "convention": "rate"},
        "simulation": {
            "seed": None, "paths": 1000, "steps": 50, "t0": 0.0, "horizon": 1.0,
            "drift_clock": "subordinated", "truncation": "full", "clock": "gamma",
            "noise": True, "localize": 0, "workers": 1, "chunk_size": 2048,
        },
        "output": {"dir": ".", "format": "csv"},
        "price": {"style": "american", "right": "put", "strikes": [95.0, 100.0, 105.0],
                  "lsm_degree": 3},
        "converge": {"m_values": [2, 4, 8, 16], "delta_t": 1.0},
        "gof": {"bins": 20, "reference": "both", "vg_fit": "mle", "sample": None,
                "synthetic": 0},
        "compare": {"chain": None, "results": None, "results_style": None,
                    "normalizer": "range"},
    }


DEFAULTS = _defaults()


def load_file(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ParseError(str(exc), path=path) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def merge(base: dict, override: dict) -> dict:
    """Section-wise merge; unknown sections or keys are rejected."""
    out = copy.deepcopy(base)
    for section, values in override.items():
        if section not in out:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in values.items():
            if key not in out[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            out[section][key] = value
    return out


def resolve(file_path=None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if file_path is not None:
        cfg = merge(cfg, load_file(file_path))
    if overrides:
        cfg = merge(cfg, overrides)
    return cfg


def _build(cls, kwargs, what):
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def build_model(cfg: dict) -> tuple[ModelParams, CorrelationStructure, SubordinatorParams]:
    p = _build(ModelParams, {k: float(v) for k, v in cfg["model"].items()}, "[model]")
    corr = _build(CorrelationStructure, {k: float(v) for k, v in cfg["correlation"].items()},
                  "[correlation]")
    sub_cfg = cfg["subordinator"]
    sub = _build(SubordinatorParams, {"alpha": float(sub_cfg["alpha"]),
                                      "beta": float(sub_cfg["beta"]),
                                      "convention": sub_cfg["convention"]}, "[subordinator]")
    return p, corr, sub


def as_int(value, name):
    if isinstance(value, bool) or int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return int(value)


def require_seed(cfg: dict) -> int:
    seed = cfg["simulation"]["seed"]
    if seed is None:
        raise ConfigError("this command is randomized: --seed (or simulation.seed) is required")
    return as_int(seed, "seed")


def build_simulation(cfg: dict, n_paths: int | None = None) -> tuple[TimeGrid, SimConfig]:
    s = cfg["simulation"]
    grid = TimeGrid(float(s["t0"]), float(s["horizon"]), as_int(s["steps"], "steps"))
    n = as_int(s["localize"], "localize")
    if n < 0:
        raise ConfigError("localize must be >= 0 (0 disables localization)")
    sim = SimConfig(
        n_paths=as_int(s["paths"] if n_paths is None else n_paths, "paths"),
        seed=require_seed(cfg),
        drift_clock=s["drift_clock"],
        truncation=s["truncation"],
        localization=LocalizationConfig(n) if n else None,
        clock=s["clock"],
        gaussian_noise=bool(s["noise"]),
        workers=as_int(s["workers"], "workers"),
        chunk_size=as_int(s["chunk_size"], "chunk_size"),
    )
    return grid, sim
