"""
Exception types for the lattice toolkit.
Each one derives from the builtin error callers would already catch.
"""

from typing import Optional


class LatticeError(ValueError):
    """Invalid lattice parameters, states or evolution grids."""


class DesignError(ValueError):
    """Inverse design of a waveguide array failed.

    Attributes:
        target: The coupling or detuning value that could not be realized
        index: Lattice index the target belongs to, if any
    """
    def __init__(self, message: str, target: Optional[float] = None, index: Optional[int] = None):
        super().__init__(message)
        self.target = target
        self.index = index


class NoBoundModeError(DesignError):
    """The channel index contrast is too weak to guide a mode."""


class CouplingResolutionError(DesignError):
    """Supermode splitting is below what the eigensolver resolves."""


class TargetOutOfRangeError(DesignError):
    """A coupling or detuning target lies outside the realizable range."""


class PropagationError(RuntimeError):
    """Beam propagation produced non-finite values."""


class ConfigError(ValueError):
    """Configuration could not be read, validated or satisfied."""
