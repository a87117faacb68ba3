"""
Lattice and Optics Data Models
------------------------------
This package contains the data models and exceptions shared by every stage.
"""

from .data_models import (
    ArrayLayout, ChannelProfile, CouplingFit, EvolutionTrace, Field, FockState, Grid, LatticeCoefficients,
    MaterialContext, ModelParams, Stage
)
from .exceptions import ConfigError, DesignError, LatticeError, PropagationError

__all__ = [
    'ArrayLayout', 'ChannelProfile', 'CouplingFit', 'EvolutionTrace', 'Field', 'FockState', 'Grid',
    'LatticeCoefficients', 'MaterialContext', 'ModelParams', 'Stage', 'ConfigError', 'DesignError',
    'LatticeError', 'PropagationError'
]
