"""Experiment harness: configs, replica execution, persistent records, reports."""

from lerwtorus.harness.config import ConfigError, ExperimentConfig, load_config, parse_config
from lerwtorus.harness.runner import RunRecord, load_record, run

__all__ = ["ConfigError", "ExperimentConfig", "RunRecord", "load_config", "load_record",
           "parse_config", "run"]
