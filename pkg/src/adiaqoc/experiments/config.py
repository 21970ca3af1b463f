"""Experiment configuration: YAML files with explicit units.

Every config has the keys ``experiment``, ``seed`` and ``output``; the
remaining sections are experiment specific and merged over the built-in
defaults, so a file only needs to state what it changes.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

EXPERIMENTS = ("rap-optimize", "rap-scan", "rap-trotter-scan", "stirap-lifetimes",
               "stirap-amplitude", "mis-rings", "bench-adiabatic-vs-ensemble")

CONFIG_VERSION = 1

# RAP: frequencies in units of the peak reference Rabi frequency, times in
# its inverse.  The grid length is chosen so the 4 pi reference peaks at 1.
_RAP = {
    "area": "4pi",
    "n_steps": 1000,
    "delta_scale": 1.0,
    "basis": {"name": "sine", "order": 6, "weight_bound": 0.5},
    "cost": {"eta": 1.0, "power_mode": "one_sided", "adiabatic_weight": 0.5},
    "optimizer": {"budget": 2000, "budget_unit": "generations", "initial_sigma": 0.3,
                  "population_size": None},
    "scan": {"epsilon": {"start": 0.5, "stop": 1.5, "count": 25},
             "doppler": {"start": -0.2, "stop": 0.2, "count": 25},
             "plateau_threshold_adiabatic": 1.0e-3, "plateau_threshold_traditional": 1.0e-2},
    "trotter": {"n_steps": [50, 100, 200, 400], "reference_steps": 64000,
                "shots": 1024, "depolarizing": 0.0, "scan_steps": 200},
    "ensemble": {"epsilon": {"start": 0.8, "stop": 1.2, "count": 5},
                 "doppler": {"start": -0.1, "stop": 0.1, "count": 5}},
}

# STIRAP: rates in units of the coupling scale g, times in 1/g; physical
# inputs carry their unit in the key name.
_STIRAP = {
    "g_over_2pi_MHz": 10.0,
    "omega_c_over_2pi_GHz": 5.0,
    "fsr_over_g": 2.0,
    "tf_times_g": 20.0,
    "n_steps": 400,
    "n_sidebands": 1,
    "theta_profile": "sin2",
    "optimize_T1_us": 50.0,
    "optimize_Tphi_us": 50.0,
    "Qc": [1.0e5, 1.0e6],
    "sweep_us": {"start": 10.0, "stop": 1000.0, "count": 9, "spacing": "log"},
    "dephasing": True,
    "amplitude": {"epsilon": {"start": 0.5, "stop": 1.5, "count": 21},
                  "T1_us": 100.0, "Tphi_us": 100.0, "Qc": 1.0e5},
    "basis": {"name": "chebyshev", "order": 8, "weight_bound": 0.5},
    "cost": {"eta": 1.0, "power_mode": "one_sided", "adiabatic_weight": 0.5},
    "optimizer": {"budget": 300, "budget_unit": "generations", "initial_sigma": 0.3,
                  "population_size": None, "dephasing_budget": 100},
}

# MIS: frequencies in units of the peak squared-sine Rabi frequency.
_MIS = {
    "rings": [2, 4, 6, 8, 10, 12, 14],
    "tf": "8pi",
    "n_steps": 1000,
    "delta_max": 2.0,
    "area": "4pi",
    "reduction": "symmetric",
    "basis": {"name": "gaussian", "order": 7, "weight_bound": 1.0},
    "cost": {"adiabatic_weight": 0.5},
    "optimizer": {"budget": 200, "budget_unit": "generations", "initial_sigma": 0.3,
                  "population_size": None},
    # terminal-only refinement around the adiabatic optimum (generations,
    # capped at the main budget; 0 disables)
    "refine": {"budget": 40, "initial_sigma": 0.02},
}

DEFAULTS = {
    "rap-optimize": {"rap": _RAP},
    "rap-scan": {"rap": _RAP},
    "rap-trotter-scan": {"rap": _RAP},
    "bench-adiabatic-vs-ensemble": {"rap": _RAP},
    "stirap-lifetimes": {"stirap": _STIRAP},
    "stirap-amplitude": {"stirap": _STIRAP},
    "mis-rings": {"mis": _MIS},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_number(value) -> float:
    """Numbers, or strings such as ``"4pi"``, ``"pi/2"``, ``"1e-3"``."""
    if isinstance(value, (int, float)):
        return float(value)
    s = str(value).replace(" ", "").lower()
    if "pi" in s:
        num, _, den = s.partition("/")
        coeff = num.replace("*", "").replace("pi", "")
        val = (float(coeff) if coeff not in ("", "+") else 1.0) * 3.141592653589793
        return val / float(den) if den else val
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot parse number {value!r}") from None


def linspace_spec(spec) -> list[float]:
    """``{start, stop, count[, spacing: log]}`` mapping, or an explicit list."""
    import numpy as np

    if isinstance(spec, dict):
        space = np.geomspace if spec.get("spacing", "linear") == "log" else np.linspace
        try:
            return [float(v) for v in space(parse_number(spec["start"]),
                                            parse_number(spec["stop"]), int(spec["count"]))]
        except KeyError as exc:
            raise ConfigError(f"range needs start, stop and count: {spec!r}") from exc
    return [parse_number(v) for v in spec]


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    output: str = "results"
    params: dict = field(default_factory=dict)
    version: int = CONFIG_VERSION

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        self.params = _merge(DEFAULTS[self.experiment], self.params)

    def section(self, name: str) -> dict:
        try:
            return self.params[name]
        except KeyError:
            raise ConfigError(f"config has no section {name!r}") from None

    def to_dict(self) -> dict:
        return {"version": self.version, "experiment": self.experiment, "seed": self.seed,
                "output": self.output, **self.params}

    def with_overrides(self, seed: int | None = None, output: str | None = None,
                       budget: int | None = None) -> "ExperimentConfig":
        params = copy.deepcopy(self.params)
        if budget is not None:
            if budget < 1:
                raise ConfigError("budget must be positive")
            for section in params.values():
                if isinstance(section, dict) and "optimizer" in section:
                    section["optimizer"]["budget"] = int(budget)
        return ExperimentConfig(self.experiment, self.seed if seed is None else seed,
                                self.output if output is None else output, params, self.version)


def config_from_dict(data: dict, experiment: str | None = None) -> ExperimentConfig:
    data = dict(data or {})
    version = data.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    exp = data.pop("experiment", experiment)
    if exp is None:
        raise ConfigError("config does not name an experiment")
    if experiment is not None and exp != experiment:
        raise ConfigError(f"config is for {exp!r}, not {experiment!r}")
    seed = data.pop("seed", 0)
    output = data.pop("output", "results/" + exp)
    return ExperimentConfig(exp, seed, output, data, version)


def load_config(path, experiment: str | None = None) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data, experiment)
