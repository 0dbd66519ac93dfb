"""Experiment harness: JSON configuration, presets, CSV/JSON output and the CLI."""

from .cli import run_cli
from .config import ConfigError, config_hash, resolve
from .experiments import ResultRecord, read_csv, run_experiment

__all__ = ["run_cli", "ConfigError", "config_hash", "resolve", "ResultRecord",
           "read_csv", "run_experiment"]
