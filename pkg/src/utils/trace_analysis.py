"""
Analysis utilities for population-imbalance traces P(z).
Provides functions to locate zero crossings, estimate oscillation periods,
track successive maxima and compare traces produced by different models.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import find_peaks

logger = logging.getLogger(__name__)


def zero_crossings(z, values) -> np.ndarray:
    """Sign changes of a sampled trace, located on its cubic interpolant.

    Args:
        z: Strictly increasing sample positions
        values: Trace samples

    Returns:
        Sorted crossing positions inside [z[0], z[-1]]
    """
    z = np.asarray(z, dtype=float)
    roots = np.sort(np.real(CubicSpline(z, np.asarray(values, dtype=float)).roots(extrapolate=False)))
    if len(roots) < 2:
        return roots
    # a root lying on a knot is reported by both neighbouring pieces
    keep = np.concatenate(([True], np.diff(roots) > 1e-9 * (z[-1] - z[0])))
    return roots[keep]


def estimate_period(z, values) -> Optional[float]:
    """Twice the mean interval between zero crossings; None with fewer than two crossings."""
    crossings = zero_crossings(z, values)
    if len(crossings) < 2:
        logger.debug("Only %d zero crossings; no period estimate", len(crossings))
        return None
    return float(2.0 * np.mean(np.diff(crossings)))


def successive_maxima(z, values, prominence: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Initial value followed by every interior local maximum.

    Args:
        z: Sample positions
        values: Trace samples
        prominence: Minimum peak prominence; None keeps every local maximum

    Returns:
        (positions, heights)
    """
    z = np.asarray(z, dtype=float)
    values = np.asarray(values, dtype=float)
    peaks, _ = find_peaks(values, prominence=prominence)
    return np.concatenate(([z[0]], z[peaks])), np.concatenate(([values[0]], values[peaks]))


def maxima_decrease(z, values, count: int = 3, prominence: Optional[float] = None) -> bool:
    """True when the first count maxima, the initial value included, strictly decrease."""
    _, heights = successive_maxima(z, values, prominence)
    return len(heights) >= count and bool(np.all(np.diff(heights[:count]) < 0))


def is_self_trapped(values) -> bool:
    """True when the imbalance never reaches zero."""
    return bool(np.all(np.asarray(values) > 0.0))


def max_deviation(z_a, values_a, z_b, values_b) -> float:
    """Largest |a - b| over the common range, b linearly interpolated onto a's samples."""
    z_a = np.asarray(z_a, dtype=float)
    z_b = np.asarray(z_b, dtype=float)
    lower, upper = max(z_a[0], z_b[0]), min(z_a[-1], z_b[-1])
    inside = (z_a >= lower) & (z_a <= upper)
    if not np.any(inside):
        raise ValueError("traces share no z range")
    interpolated = np.interp(z_a[inside], z_b, np.asarray(values_b, dtype=float))
    return float(np.max(np.abs(np.asarray(values_a, dtype=float)[inside] - interpolated)))


def relative_error(value: float, reference: float) -> float:
    return abs(value - reference) / abs(reference)
