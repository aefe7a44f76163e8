"""Named verification experiments with machine-readable verdicts."""

from __future__ import annotations

from pathlib import Path

from ..errors import ConfigError
from .config import BASE_SCHEMA, ExperimentConfig, parse_config
from .experiments import REGISTRY, dyadic_batch, dyadic_strong_components
from .report import render, summarize, to_csv, to_json, write_atomic, write_report


def experiment_names() -> list[str]:
    return sorted(REGISTRY)


def load_config(obj, experiment: str | None = None) -> ExperimentConfig:
    """Parse a config and check it against the named experiment's required keys.

    ``experiment`` overrides the name stored in the config.
    """
    if not isinstance(obj, (str, Path, dict)):
        raise ConfigError("config must be a mapping, JSON text or a path")
    base = parse_config(obj)
    name = experiment or base.experiment
    if name is None:
        raise ConfigError("no experiment named", "/experiment")
    if name not in REGISTRY:
        raise ConfigError(f"unknown experiment {name!r}", "/experiment")
    cfg = parse_config(base.raw, required=REGISTRY[name].required)
    cfg.experiment = name
    cfg.raw["experiment"] = name
    return cfg


def run_experiment(cfg: ExperimentConfig | dict | str | Path, experiment: str | None = None) -> list:
    if not isinstance(cfg, ExperimentConfig):
        cfg = load_config(cfg, experiment)
    elif experiment is not None:
        cfg.experiment = experiment
    if cfg.experiment not in REGISTRY:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}", "/experiment")
    return REGISTRY[cfg.experiment].run(cfg)


__all__ = [
    "BASE_SCHEMA",
    "ExperimentConfig",
    "REGISTRY",
    "dyadic_batch",
    "dyadic_strong_components",
    "experiment_names",
    "load_config",
    "parse_config",
    "render",
    "run_experiment",
    "summarize",
    "to_csv",
    "to_json",
    "write_atomic",
    "write_report",
]
