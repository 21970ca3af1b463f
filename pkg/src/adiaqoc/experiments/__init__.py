"""Named experiments and their runner."""
from __future__ import annotations

from pathlib import Path

from .bundle import ResultBundle
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, config_from_dict, load_config
from .mis import run_mis_study
from .rap import run_benchmark, run_rap_scan, run_rap_study, run_rap_trotter_scan
from .stirap import run_stirap_amplitude, run_stirap_lifetimes

RUNNERS = {
    "rap-optimize": run_rap_study,
    "rap-scan": run_rap_scan,
    "rap-trotter-scan": run_rap_trotter_scan,
    "stirap-lifetimes": run_stirap_lifetimes,
    "stirap-amplitude": run_stirap_amplitude,
    "mis-rings": run_mis_study,
    "bench-adiabatic-vs-ensemble": run_benchmark,
}


def run_experiment(config: ExperimentConfig, out_dir=None, map_fn=None) -> ResultBundle:
    out = Path(out_dir if out_dir is not None else config.output)
    return RUNNERS[config.experiment](config, out, map_fn)


__all__ = ["EXPERIMENTS", "RUNNERS", "ConfigError", "ExperimentConfig", "ResultBundle",
           "config_from_dict", "load_config", "run_experiment"]
