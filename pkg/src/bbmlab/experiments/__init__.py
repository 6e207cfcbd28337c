"""Replication harness: config, deterministic parallel runs, estimators."""

from .config import ConfigError, ExperimentConfig, config_hash, load_config
from .estimators import (
    estimate_growth_exponent,
    estimate_ld_rate,
    mean_interval,
    wilson_interval,
)
from .runner import RunPaths, run_experiment, resume_experiment

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "config_hash",
    "load_config",
    "estimate_growth_exponent",
    "estimate_ld_rate",
    "mean_interval",
    "wilson_interval",
    "RunPaths",
    "run_experiment",
    "resume_experiment",
]
