"""Run orchestration: configuration, scenario presets, drivers, check suites."""

from .config import ConfigError, SimulationConfig, parse_config
from .runner import run, write_csv
from .checks import run_checks

__all__ = [
    "ConfigError",
    "SimulationConfig",
    "parse_config",
    "run",
    "write_csv",
    "run_checks",
]
