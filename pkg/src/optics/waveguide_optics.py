"""
Inverse design of waveguide arrays that realize a Fock lattice.
Characterizes the coupling-versus-distance law of the channel, inverts it
for the spacings, solves for the index contrasts that produce the required
detunings and assembles a centered, mirror-symmetric layout.

Detuning sign convention: a lattice detuning V_l is realized as
V_l = offset - (beta_l - beta_ref), i.e. a larger V lowers the
propagation constant of channel l relative to the reference channel.
Inside an array beta_l is the on-site term of the coupled-mode matrix,
which includes the shift induced by the neighbouring channels.
"""

import logging
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.stats import linregress

from src.lattice.fock_core import build_coefficients
from src.models.data_models import (
    ArrayLayout, ChannelProfile, CouplingFit, GaugeChoice, MaterialContext, ModelParams
)
from src.models.exceptions import DesignError, NoBoundModeError, TargetOutOfRangeError
from src.optics.mode_solver import array_hamiltonian, beta_shift, pair_constants, solve_single_mode
from src.optics.profiles import channel_g, index_profile

logger = logging.getLogger(__name__)

FIT_RESIDUAL_WARNING = 0.05
DETUNING_RESIDUAL = 1e-3
COUPLING_RESIDUAL = 1e-7
ARRAY_ITERATIONS = 8

__all__ = [
    "channel_g", "index_profile", "solve_single_mode", "sample_index_profile", "pair_coupling",
    "coupling_vs_distance", "fit_coupling_law", "characterize_coupling", "design_spacings",
    "gauge_offset", "centered_positions", "design_contrasts", "realized_coefficients",
    "assemble_array",
]


def sample_index_profile(layout: ArrayLayout, margin_um: float = 20.0,
                         dx_um: float = 0.05) -> Tuple[np.ndarray, np.ndarray]:
    """Plot-ready series (x, n(x) - n_s) spanning the array plus a margin."""
    x = np.arange(layout.positions_um[0] - margin_um, layout.positions_um[-1] + margin_um + 0.5 * dx_um, dx_um)
    return x, index_profile(layout, x)


def pair_coupling(material: MaterialContext, profile: ChannelProfile, dn_a: float, dn_b: float,
                  d_um: float, dx_um: float = 0.05) -> float:
    """Coupling rate of two channels, possibly detuned (mm^-1).

    kappa = 1/2 sqrt(splitting^2 - (beta_a - beta_b)^2), which reduces to half
    the supermode splitting for identical channels.
    """
    if d_um <= 2.0 * profile.half_width_um:
        raise TargetOutOfRangeError(f"spacing {d_um} um overlaps channels of width "
                                    f"{2.0 * profile.half_width_um} um", target=d_um)
    beta_even, beta_odd, beta_a, beta_b = pair_constants(material, profile, dn_a, dn_b, d_um, dx_um)
    splitting = beta_even - beta_odd
    return 0.5 * float(np.sqrt(max(splitting ** 2 - (beta_a - beta_b) ** 2, 0.0)))


def coupling_vs_distance(material: MaterialContext, profile: ChannelProfile, dn_ref: float,
                         d_um: float, dx_um: float = 0.05) -> float:
    """Coupling of two identical channels at separation d from their supermode splitting."""
    return pair_coupling(material, profile, dn_ref, dn_ref, d_um, dx_um)


def fit_coupling_law(samples: Sequence[Tuple[float, float]], d_ref_um: float, dn_ref: float = 2e-3) -> CouplingFit:
    """Least-squares fit of ln kappa = ln kappa0 - gamma (d - d_ref).

    Args:
        samples: (d in um, kappa in mm^-1) pairs
        d_ref_um: Anchor spacing; must lie within the sampled range
        dn_ref: Contrast the samples were computed at

    Returns:
        CouplingFit with the RMS relative residual of the fit

    Raises:
        DesignError: Fewer than 4 samples, d_ref outside the samples or kappa <= 0
    """
    d = np.array([s[0] for s in samples], dtype=float)
    kappa = np.array([s[1] for s in samples], dtype=float)
    if len(d) < 4:
        raise DesignError(f"coupling fit needs at least 4 samples, got {len(d)}")
    if not d.min() <= d_ref_um <= d.max():
        raise DesignError(f"reference spacing {d_ref_um} um outside sampled range", target=d_ref_um)
    if np.any(kappa <= 0):
        bad = int(np.argmax(kappa <= 0))
        raise DesignError(f"non-positive coupling sample {kappa[bad]} at d={d[bad]} um",
                          target=float(kappa[bad]), index=bad)

    regression = linregress(d - d_ref_um, np.log(kappa))
    fit = CouplingFit(kappa0_per_mm=float(np.exp(regression.intercept)),
                      gamma_per_um=float(-regression.slope),
                      d_ref_um=d_ref_um, dn_ref=dn_ref)
    residual = float(np.sqrt(np.mean((fit.kappa_at(d) / kappa - 1.0) ** 2)))
    return CouplingFit(fit.kappa0_per_mm, fit.gamma_per_um, d_ref_um, dn_ref, residual)


def characterize_coupling(material: MaterialContext, profile: ChannelProfile, dn_ref: float, d_ref_um: float,
                          d_min_um: float = 6.5, d_max_um: float = 9.5, count: int = 7,
                          dx_um: float = 0.05) -> Tuple[np.ndarray, np.ndarray, CouplingFit]:
    """Sample kappa(d) on a uniform range of spacings and fit the exponential law."""
    distances = np.linspace(d_min_um, d_max_um, count)
    kappas = np.array([coupling_vs_distance(material, profile, dn_ref, d, dx_um) for d in distances])
    fit = fit_coupling_law(list(zip(distances, kappas)), d_ref_um, dn_ref)
    logger.info("Coupling law: kappa0=%.4f mm^-1, gamma=%.4f um^-1, residual=%.2e",
                fit.kappa0_per_mm, fit.gamma_per_um, fit.residual_rms)
    if fit.residual_rms > FIT_RESIDUAL_WARNING:
        logger.warning("Exponential coupling law fits poorly (RMS residual %.1f%%)", 100 * fit.residual_rms)
    return distances, kappas, fit


def _polish_spacing(material: MaterialContext, profile: ChannelProfile, fit: CouplingFit, target: float,
                    guess: float, dx_um: float) -> float:
    floor = 2.0 * profile.half_width_um + 1e-6

    def mismatch(d):
        return np.log(coupling_vs_distance(material, profile, fit.dn_ref, d, dx_um) / target)

    low, high = max(guess - 0.25, floor), guess + 0.25
    for _ in range(8):
        if mismatch(low) * mismatch(high) <= 0:
            return float(brentq(mismatch, low, high, xtol=1e-9))
        low, high = max(low - 0.25, floor), high + 0.25
    logger.warning("Could not bracket spacing for kappa=%.4f mm^-1; keeping fit inversion %.4f um", target, guess)
    return guess


def design_spacings(fit: CouplingFit, kappa_targets: Sequence[float],
                    profile: Optional[ChannelProfile] = None, material: Optional[MaterialContext] = None,
                    refine: bool = False, dx_um: float = 0.05) -> np.ndarray:
    """Spacings d_l (l = 1..N) realizing the coupling targets kappa_{l-1}.

    d = d_ref - ln(kappa_target / kappa0) / gamma, optionally polished by
    root-finding against coupling_vs_distance at the reference contrast.

    Raises:
        TargetOutOfRangeError: If a target would need overlapping channels
    """
    targets = np.asarray(kappa_targets, dtype=float)
    if np.any(targets <= 0):
        raise TargetOutOfRangeError("coupling targets must be positive")
    spacings = fit.d_ref_um - np.log(targets / fit.kappa0_per_mm) / fit.gamma_per_um

    if profile is not None:
        overlapping = np.flatnonzero(spacings <= 2.0 * profile.half_width_um)
        if overlapping.size:
            l = int(overlapping[0])
            raise TargetOutOfRangeError(
                f"kappa_{l}={targets[l]:.4f} mm^-1 needs spacing {spacings[l]:.3f} um, channels would overlap",
                target=float(targets[l]), index=l)

    if refine:
        if profile is None or material is None:
            raise DesignError("spacing refinement needs the channel profile and material")
        polished: Dict[float, float] = {}
        for l, (target, guess) in enumerate(zip(targets, spacings)):
            if target not in polished:
                polished[target] = _polish_spacing(material, profile, fit, target, guess, dx_um)
            spacings[l] = polished[target]
            logger.debug("d_%d: fit %.4f um -> %.4f um", l + 1, guess, spacings[l])

    return 0.5 * (spacings + spacings[::-1])


def gauge_offset(V_targets: Sequence[float], gauge: GaugeChoice = GaugeChoice.MEAN) -> float:
    """Constant removed from every detuning before contrast design."""
    return float(np.mean(V_targets)) if gauge is GaugeChoice.MEAN else 0.0


def centered_positions(spacings: Sequence[float]) -> np.ndarray:
    """Channel centers with sum_l x_l = 0 and x_l = -x_{N-l}."""
    positions = np.concatenate([[0.0], np.cumsum(spacings)])
    positions -= positions.mean()
    return 0.5 * (positions - positions[::-1])


def _onsite_detunings(hamiltonian: np.ndarray, offset: float) -> np.ndarray:
    """V_l = offset - (B_ll - mean B_ll); a constant on-site term is a global phase."""
    onsite = np.diag(hamiltonian)
    return offset - (onsite - onsite.mean())


def _contrast_for_shift(material: MaterialContext, profile: ChannelProfile, fit: CouplingFit,
                        target_beta: float, slope: float, tolerance: float, index: int, dx_um: float) -> float:
    def mismatch(dn):
        return beta_shift(material, profile, dn, dx_um) - target_beta

    guess = fit.dn_ref + (target_beta - beta_shift(material, profile, fit.dn_ref, dx_um)) / slope
    step = max(abs(guess - fit.dn_ref), 1e-3 * fit.dn_ref)
    low, high = guess - step, guess + step
    for _ in range(20):
        if low <= 0:
            raise DesignError(f"channel {index} would need a non-positive contrast", target=target_beta, index=index)
        try:
            if mismatch(low) * mismatch(high) <= 0:
                break
        except NoBoundModeError as e:
            raise DesignError(f"channel {index} unguided while bracketing contrast {low:.3e}",
                              target=target_beta, index=index) from e
        low, high = guess - 2.0 * (guess - low), guess + 2.0 * (high - guess)
    else:
        raise TargetOutOfRangeError(f"no contrast reaches beta={target_beta:.4f} mm^-1 for channel {index}",
                                    target=target_beta, index=index)
    return float(brentq(mismatch, low, high, xtol=0.1 * tolerance / abs(slope), rtol=1e-14))


def _compensate_neighbour_shifts(material: MaterialContext, profile: ChannelProfile, positions: np.ndarray,
                                 contrasts: np.ndarray, shifted: np.ndarray, slope: float, scale: float,
                                 dx_um: float) -> np.ndarray:
    """Correct contrasts for the propagation-constant shift each channel picks up from its neighbours.

    The on-site terms of the whole-array coupled-mode matrix are driven to the
    target detunings by fixed-point steps dn_l += residual_l / (d beta / d dn).
    Only differences between channels are matched.
    """
    goal = shifted - shifted.mean()
    residual = np.zeros_like(goal)
    for iteration in range(ARRAY_ITERATIONS):
        try:
            hamiltonian = array_hamiltonian(material, profile, positions, contrasts, dx_um)
        except NoBoundModeError as e:
            raise DesignError(f"array stops guiding while compensating neighbour shifts: {e}",
                              target=e.target, index=e.index) from e
        residual = _onsite_detunings(hamiltonian, 0.0) - goal
        tolerance = DETUNING_RESIDUAL * max(scale, float(np.max(np.diag(hamiltonian, 1))))
        if np.max(np.abs(residual)) <= tolerance:
            logger.debug("Neighbour shifts compensated after %d steps (residual %.2e mm^-1)",
                         iteration, np.max(np.abs(residual)))
            return contrasts
        contrasts = contrasts + residual / slope
        contrasts = 0.5 * (contrasts + contrasts[::-1])
        if np.any(contrasts <= 0):
            l = int(np.argmin(contrasts))
            raise DesignError(f"channel {l} would need a non-positive contrast", target=float(goal[l]), index=l)
    logger.warning("Neighbour-shift compensation stopped with a detuning residual of %.2e mm^-1",
                   np.max(np.abs(residual)))
    return contrasts


def design_contrasts(material: MaterialContext, profile: ChannelProfile, fit: CouplingFit,
                     layout_spacings: Sequence[float], V_targets: Sequence[float],
                     gauge: GaugeChoice = GaugeChoice.MEAN, dx_um: float = 0.05) -> np.ndarray:
    """Index contrasts dn_l whose propagation-constant shifts realize V_l.

    Each contrast first solves beta(dn_l) = beta(dn_ref) - (V_l - offset)
    for an isolated channel by Brent root-finding, bracketed from the local
    slope d beta / d dn. The contrasts are then corrected inside the
    assembled array, where edge channels have one neighbour and interior
    channels two, until the on-site terms of the array match the detunings.

    Raises:
        DesignError: Size mismatch, or a channel that stops guiding
        TargetOutOfRangeError: A detuning no contrast can reach
    """
    V = np.asarray(V_targets, dtype=float)
    if len(V) != len(layout_spacings) + 1:
        raise DesignError(f"{len(V)} detunings for {len(layout_spacings)} spacings")
    shifted = V - gauge_offset(V, gauge)
    contrasts = np.full(len(V), fit.dn_ref)
    scale = float(np.max(np.abs(shifted)))

    dn_ref = fit.dn_ref
    h = 0.02 * dn_ref
    slope = (beta_shift(material, profile, dn_ref + h, dx_um) - beta_shift(material, profile, dn_ref - h, dx_um)) / (2 * h)

    n = len(V) - 1
    half = (n + 2) // 2
    if scale > 0.0:
        beta_ref = beta_shift(material, profile, dn_ref, dx_um)
        tolerance = DETUNING_RESIDUAL * scale
        for l in range(half):
            if abs(shifted[l]) <= 0.1 * tolerance:
                continue
            target = beta_ref - shifted[l]
            contrasts[l] = _contrast_for_shift(material, profile, fit, target, slope, tolerance, l, dx_um)
            residual = beta_shift(material, profile, contrasts[l], dx_um) - target
            if abs(residual) > tolerance:
                logger.warning("Channel %d detuning residual %.2e mm^-1 above tolerance", l, residual)
            logger.debug("dn_%d = %.6e (V'=%.4f mm^-1)", l, contrasts[l], shifted[l])
        contrasts[n - np.arange(half)] = contrasts[:half]

    positions = centered_positions(layout_spacings)
    return _compensate_neighbour_shifts(material, profile, positions, contrasts, shifted, slope, scale, dx_um)


@lru_cache(maxsize=64)
def _refine_spacings_in_array(material: MaterialContext, profile: ChannelProfile, fit: CouplingFit,
                              targets: Tuple[float, ...], start: Tuple[float, ...],
                              dx_um: float) -> Tuple[float, ...]:
    """Spacings whose whole-array couplings match the targets in the interaction-free array.

    Each step solves the U = 0 contrasts, reads the couplings off the array
    matrix and moves d_l by ln(kappa_l / target_l) / gamma.
    """
    goal = np.asarray(targets)
    spacings = np.asarray(start)
    flat = np.zeros(len(spacings) + 1)
    mismatch = np.zeros_like(goal)
    for iteration in range(ARRAY_ITERATIONS):
        contrasts = design_contrasts(material, profile, fit, spacings, flat, GaugeChoice.MEAN, dx_um)
        hamiltonian = array_hamiltonian(material, profile, centered_positions(spacings), contrasts, dx_um)
        mismatch = np.log(np.diag(hamiltonian, 1) / goal)
        if np.max(np.abs(mismatch)) <= COUPLING_RESIDUAL:
            logger.debug("Array couplings matched after %d steps", iteration)
            return tuple(spacings)
        spacings = spacings + mismatch / fit.gamma_per_um
        spacings = 0.5 * (spacings + spacings[::-1])
    logger.warning("Array coupling refinement stopped at a relative mismatch of %.2e", np.max(np.abs(mismatch)))
    return tuple(spacings)


def realized_coefficients(layout: ArrayLayout, dx_um: float = 0.05) -> Tuple[np.ndarray, np.ndarray]:
    """Lattice (kappa, V) actually implemented by a layout, in mm^-1.

    Both are read off the coupled-mode matrix of the whole array, so V
    contains the shifts induced by neighbouring channels. V is defined up to
    a constant and is reported with its mean at the layout's detuning offset.
    """
    hamiltonian = array_hamiltonian(layout.material, layout.channel, layout.positions_um, layout.contrasts, dx_um)
    if len(hamiltonian) > 2:
        logger.debug("Largest coupling beyond nearest neighbours: %.2e mm^-1",
                     np.max(np.abs(np.triu(hamiltonian, 2))))
    return np.diag(hamiltonian, 1).copy(), _onsite_detunings(hamiltonian, layout.detuning_offset_per_mm)


def assemble_array(params: ModelParams, material: MaterialContext, profile: ChannelProfile, fit: CouplingFit,
                   gauge: GaugeChoice = GaugeChoice.MEAN, refine: bool = True, dx_um: float = 0.05) -> ArrayLayout:
    """Design the complete array for one set of Bose-Hubbard parameters.

    Composes build_coefficients, design_spacings and design_contrasts and
    centers the channels so that sum_l x_l = 0 with x_l = -x_{N-l}. With
    refine, the spacings are matched to the couplings of the whole U = 0
    array, so they stay U-independent.
    """
    coeffs = build_coefficients(params)
    spacings = design_spacings(fit, coeffs.kappa, profile, material, refine, dx_um)
    if refine:
        spacings = np.array(_refine_spacings_in_array(material, profile, fit, tuple(coeffs.kappa),
                                                      tuple(spacings), dx_um))
    contrasts = design_contrasts(material, profile, fit, spacings, coeffs.V, gauge, dx_um)

    layout = ArrayLayout(positions_um=centered_positions(spacings), contrasts=contrasts, channel=profile,
                         material=material, reference_spacing_um=fit.d_ref_um, reference_contrast=fit.dn_ref,
                         detuning_offset_per_mm=gauge_offset(coeffs.V, gauge))
    layout.validate()
    logger.info("Designed array N=%d U=%.4f: spacings %.3f..%.3f um, contrasts %.4e..%.4e",
                params.N, params.U, spacings.min(), spacings.max(), contrasts.min(), contrasts.max())
    return layout
