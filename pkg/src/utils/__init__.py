"""
Utility Functions
-----------------
This package contains logging setup and helpers for analyzing imbalance traces.
"""

from .logging_config import get_logger, setup_logging
from .trace_analysis import estimate_period, is_self_trapped, zero_crossings

__all__ = ['get_logger', 'setup_logging', 'estimate_period', 'is_self_trapped', 'zero_crossings']
