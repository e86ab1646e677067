"""Metrics, datasets, file formats, configuration and experiment runners."""

from .config import ConfigError, MissingArtifact, default_config, load_config
from .experiments import EXPERIMENTS, ExperimentReport, run_experiment
from .io import FormatError
from .metrics import GOD_THRESHOLD, GodResult, god, score_detection

__all__ = [
    "ConfigError", "EXPERIMENTS", "ExperimentReport", "FormatError", "GOD_THRESHOLD", "GodResult",
    "MissingArtifact", "default_config", "god", "load_config", "run_experiment", "score_detection",
]
