import numpy as np
import pytest

from src.utils.trace_analysis import (
    estimate_period, is_self_trapped, max_deviation, maxima_decrease, relative_error, successive_maxima,
    zero_crossings
)


def test_zero_crossings_of_cosine():
    z = np.linspace(0.0, 20.0, 401)
    crossings = zero_crossings(z, np.cos(z))
    expected = np.pi / 2.0 + np.pi * np.arange(6)
    assert np.allclose(crossings, expected, atol=1e-5)


def test_crossing_on_a_sample_is_reported_once():
    z = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    crossings = zero_crossings(z, np.array([1.0, 0.5, 0.0, -0.5, -1.0]))
    assert len(crossings) == 1
    assert crossings[0] == pytest.approx(2.0)


def test_period_estimate():
    z = np.linspace(0.0, 100.0, 2001)
    assert estimate_period(z, np.cos(2.0 * np.pi * z / 40.22)) == pytest.approx(40.22, rel=1e-6)
    assert estimate_period(z, 0.5 + 0.2 * np.cos(z)) is None


def test_successive_maxima_of_damped_oscillation():
    z = np.linspace(0.0, 30.0, 3001)
    positions, heights = successive_maxima(z, np.exp(-0.05 * z) * np.cos(z))
    assert positions[0] == 0.0
    assert heights[0] == pytest.approx(1.0)
    assert np.all(np.diff(heights) < 0)
    assert positions[1] == pytest.approx(2.0 * np.pi, abs=0.1)


def test_maxima_decrease_ignores_ripple():
    z = np.linspace(0.0, 30.0, 3001)
    damped = np.exp(-0.05 * z) * np.cos(z)
    rippled = damped + 0.01 * np.sin(40.0 * z)
    assert maxima_decrease(z, damped)
    assert not maxima_decrease(z, rippled)
    assert maxima_decrease(z, rippled, prominence=0.1)
    assert not maxima_decrease(z, np.cos(z) ** 2 + 0.01 * z, prominence=0.1)
    assert not maxima_decrease(z[:300], damped[:300], count=3)


def test_self_trapping_classifier():
    assert is_self_trapped([1.0, 0.4, 0.2, 0.6])
    assert not is_self_trapped([1.0, 0.0, 0.5])
    assert not is_self_trapped([1.0, -0.3])


def test_max_deviation_uses_common_range():
    z_a = np.linspace(0.0, 10.0, 101)
    z_b = np.linspace(0.0, 5.0, 1001)
    deviation = max_deviation(z_a, np.sin(z_a), z_b, np.sin(z_b) + 0.1)
    assert deviation == pytest.approx(0.1, abs=1e-4)
    with pytest.raises(ValueError):
        max_deviation(z_a, z_a, z_a + 20.0, z_a)


def test_relative_error():
    assert relative_error(42.0, 40.0) == pytest.approx(0.05)
    assert relative_error(38.0, 40.0) == pytest.approx(0.05)
