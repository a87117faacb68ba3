"""
Experiment Runner
-----------------
Config-driven stages that write design tables, traces, intensity maps and
the comparison report.
"""

from .config import ExperimentConfig, load_config
from .runner import StageResult, run_all, run_stages

__all__ = ['ExperimentConfig', 'load_config', 'StageResult', 'run_all', 'run_stages']
