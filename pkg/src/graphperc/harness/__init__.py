"""Experiment configs, runners, report emission and the command line."""

from graphperc.harness.config import ConfigError, ExperimentConfig
from graphperc.harness.report import Check, Report, emit

__all__ = ["ConfigError", "ExperimentConfig", "Check", "Report", "emit"]
