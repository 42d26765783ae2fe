"""Reproducible pass/fail experiments and their canonical reports."""
from .engine import (
    EXPERIMENTS,
    TOLERANCES,
    ConfigError,
    ExperimentConfig,
    moment_diagnostics,
    run_experiment,
    worker_count,
)
from .report import ExperimentReport, Verdict, canonical_json, config_sha256, csv_text, write_outputs

__all__ = [
    "EXPERIMENTS", "TOLERANCES", "ConfigError", "ExperimentConfig", "moment_diagnostics",
    "run_experiment", "worker_count", "ExperimentReport", "Verdict", "canonical_json",
    "config_sha256", "csv_text", "write_outputs",
]
