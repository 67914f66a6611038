"""Experiment runner, power-law fitting and result serialization."""
from .config import ExperimentConfig, config_from_dict, load_config
from .fitting import ScalingFit, ZetaBoundReport, fit_power_law, zeta_bound_check
from .output import ResultRow, read_csv, rows_to_csv, write_csv, write_json
from .runner import (EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_NUMERICAL, EXIT_OK, SweepResult,
                     resolve_weight, run)

__all__ = [
    "ExperimentConfig", "config_from_dict", "load_config", "ScalingFit", "ZetaBoundReport",
    "fit_power_law", "zeta_bound_check", "ResultRow", "read_csv", "rows_to_csv", "write_csv",
    "write_json", "SweepResult", "resolve_weight", "run", "EXIT_OK", "EXIT_CONFIG",
    "EXIT_NUMERICAL", "EXIT_INCONCLUSIVE",
]
