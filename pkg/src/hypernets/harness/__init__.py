"""Experiment configuration, runs, gradient suite and image grids."""

from .config import PRESETS, ConfigError, ExperimentConfig, config_key_docs, load_config, parse_config, preset_text
from .gradsuite import CheckResult, registered_checks, run_check, run_suite
from .render import ComparisonGrid, grid_shape, paired_grid, pgm_bytes, quantize, read_pgm
from .runner import ARTIFACTS, RunResult, build_split, comparison_grid, copy_input_loss, eval_csv, run_experiment

__all__ = [
    "ARTIFACTS",
    "PRESETS",
    "CheckResult",
    "ComparisonGrid",
    "ConfigError",
    "ExperimentConfig",
    "RunResult",
    "build_split",
    "comparison_grid",
    "config_key_docs",
    "copy_input_loss",
    "eval_csv",
    "grid_shape",
    "load_config",
    "paired_grid",
    "parse_config",
    "pgm_bytes",
    "preset_text",
    "quantize",
    "read_pgm",
    "registered_checks",
    "run_check",
    "run_experiment",
    "run_suite",
]
