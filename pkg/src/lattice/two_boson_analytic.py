"""
Closed-form dynamics of two bosons in the double well.
Starting from c_0(0) = 1 the three-site lattice has analytic occupation
probabilities, the right-well fraction p_R and the pair probability p_2.
These serve as an exact check on the numerical lattice evolution.
"""

import numpy as np

from src.models.data_models import LatticeCoefficients, TwoBosonObservables, TwoBosonParams
from src.models.exceptions import LatticeError


def _validate(params: TwoBosonParams) -> None:
    if not params.J > 0:
        raise LatticeError(f"hopping rate must be positive, got J={params.J}")


def _pair_transfer(params: TwoBosonParams, t: np.ndarray) -> np.ndarray:
    """|c_2(t)|^2 evaluated term by term from the four-term expression."""
    U, M = params.U, params.M
    cos_m, sin_m = np.cos(M * t), np.sin(M * t)
    return 0.25 * (
        1.0 + cos_m ** 2
        - 2.0 * np.cos(U * t / 2.0) * cos_m
        - (U / M) * np.sin(U * t / 2.0) * sin_m
        + (U ** 2 / (4.0 * M ** 2)) * sin_m ** 2
    )


def closed_form_probs(params: TwoBosonParams, t):
    """Occupation probabilities (|c_0|^2, |c_1|^2, |c_2|^2) at t (mm).

    Args:
        params: Hopping and interaction (mm^-1)
        t: Scalar or array of evolution coordinates

    Returns:
        Array of shape (3,) + shape(t)
    """
    _validate(params)
    t = np.asarray(t, dtype=float)
    J, M = params.J, params.M
    single = (2.0 * J ** 2 / M ** 2) * np.sin(M * t) ** 2
    pair = _pair_transfer(params, t)
    return np.stack([1.0 - single - pair, single, pair])


def p_right(params: TwoBosonParams, t):
    """Fraction of bosons in the right well, |c_0|^2 + |c_1|^2/2."""
    _validate(params)
    t = np.asarray(t, dtype=float)
    J, M = params.J, params.M
    return 1.0 - (J ** 2 / M ** 2) * np.sin(M * t) ** 2 - _pair_transfer(params, t)


def p_pair(params: TwoBosonParams, t):
    """Probability that both bosons share a well, 1 - (2J^2/M^2) sin^2(Mt)."""
    _validate(params)
    t = np.asarray(t, dtype=float)
    return 1.0 - single_occupancy_peak(params) * np.sin(params.M * t) ** 2


def single_occupancy_peak(params: TwoBosonParams) -> float:
    """Largest value reached by |c_1|^2, 2J^2/M^2."""
    return 2.0 * params.J ** 2 / params.M ** 2


def pair_probability_floor(params: TwoBosonParams) -> float:
    """Smallest value reached by p_2."""
    return 1.0 - single_occupancy_peak(params)


def observables(params: TwoBosonParams, t) -> TwoBosonObservables:
    """Bundle probabilities, p_R and p_2 on a grid of t."""
    t = np.asarray(t, dtype=float)
    return TwoBosonObservables(
        t=t,
        probs=closed_form_probs(params, t),
        p_right=p_right(params, t),
        p_pair=p_pair(params, t),
    )


def triplet_coefficients(params: TwoBosonParams) -> LatticeCoefficients:
    """Three-waveguide realization: equal couplings sqrt(2)J, outer sites detuned by U."""
    _validate(params)
    kappa = np.full(2, np.sqrt(2.0) * params.J)
    return LatticeCoefficients(kappa=kappa, V=np.array([params.U, 0.0, params.U]))
