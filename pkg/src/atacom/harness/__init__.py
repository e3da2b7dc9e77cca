"""Experiment harness: config files, the episode loop, sweeps and output files."""
from .config import ConfigError, ExperimentConfig, load_config, parse_text
from .outputs import emit_outputs, emit_plots, emit_sweep
from .runner import EpisodeRecord, ExperimentResult, SweepCell, run_episode, run_experiment, summarize, sweep

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_text",
    "emit_outputs",
    "emit_plots",
    "emit_sweep",
    "EpisodeRecord",
    "ExperimentResult",
    "SweepCell",
    "run_episode",
    "run_experiment",
    "summarize",
    "sweep",
]
