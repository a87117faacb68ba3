"""
Eigenmodes of the stationary paraxial problem.

Dividing the paraxial wave equation by the reduced wavelength gives the
Schrodinger-form operator  -D d^2/dx^2 - (n(x) - n_s)/lambdabar  with
D = lambdabar / (2 n_s). A guided mode has a negative eigenvalue E and a
propagation-constant shift beta = -E above the substrate line.

Two discretizations are provided: a three-point finite-difference stencil
(tridiagonal, used for design) and the Fourier grid Hamiltonian (dense,
spectrally accurate, used on beam grids so launched modes are stationary
under the split-step propagator).
"""

import logging
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal, toeplitz

from src.models.data_models import ChannelProfile, GuidedMode, MaterialContext, ModeMethod
from src.models.exceptions import CouplingResolutionError, NoBoundModeError
from src.optics.profiles import channel_g, channels_profile

logger = logging.getLogger(__name__)

PER_UM_TO_PER_MM = 1e3
RICHARDSON_TOLERANCE = 1e-4


def symmetric_grid(half_width_um: float, dx_um: float) -> np.ndarray:
    """Odd-length grid on [-half, half] that contains x = 0."""
    half_points = int(np.ceil(half_width_um / dx_um))
    return dx_um * np.arange(-half_points, half_points + 1)


def _finite_difference_states(dx_um: float, potential: np.ndarray, coefficient: float, count: int):
    diagonal = 2.0 * coefficient / dx_um ** 2 + potential
    off_diagonal = np.full(len(potential) - 1, -coefficient / dx_um ** 2)
    return eigh_tridiagonal(diagonal, off_diagonal, select="i", select_range=(0, count - 1))


def _fourier_grid_states(dx_um: float, potential: np.ndarray, coefficient: float, count: int):
    n = len(potential)
    offsets = np.arange(n, dtype=float)
    offsets[0] = 1.0
    column = 2.0 * (-1.0) ** np.arange(n) / (dx_um * offsets) ** 2
    column[0] = np.pi ** 2 / (3.0 * dx_um ** 2)
    hamiltonian = coefficient * toeplitz(column) + np.diag(potential)
    return eigh(hamiltonian, subset_by_index=[0, count - 1])


def lowest_states(x_um: np.ndarray, dn_profile: np.ndarray, material: MaterialContext,
                  count: int = 2, method: ModeMethod = ModeMethod.FINITE_DIFFERENCE
                  ) -> Tuple[np.ndarray, np.ndarray]:
    """Lowest eigenpairs of the Schrodinger-form operator on a uniform grid.

    Args:
        x_um: Uniform grid
        dn_profile: n(x) - n_s sampled on x_um
        material: Wavelength and substrate index
        count: Number of eigenpairs
        method: Discretization

    Returns:
        (energies in um^-1, eigenvectors as columns normalized to unit L2 norm on the grid)
    """
    dx_um = float(x_um[1] - x_um[0])
    potential = -np.asarray(dn_profile, dtype=float) / material.lambdabar_um
    coefficient = material.diffraction_coefficient_um
    if method is ModeMethod.FINITE_DIFFERENCE:
        energies, vectors = _finite_difference_states(dx_um, potential, coefficient, count)
    else:
        energies, vectors = _fourier_grid_states(dx_um, potential, coefficient, count)
    return energies, vectors / np.sqrt(dx_um)


def _even_sign(vector: np.ndarray) -> np.ndarray:
    """Fix the arbitrary eigenvector sign so the largest lobe is positive."""
    return vector if vector[np.argmax(np.abs(vector))] > 0 else -vector


def _single_channel(material: MaterialContext, profile: ChannelProfile, dn: float,
                    dx_um: float, window_um: float, method: ModeMethod):
    x = symmetric_grid(profile.half_width_um + window_um, dx_um)
    energies, vectors = lowest_states(x, dn * channel_g(profile, x), material, 2, method)
    if energies[0] >= 0:
        raise NoBoundModeError(f"contrast {dn:.3e} guides no mode", target=dn)
    bound = int(np.count_nonzero(energies < 0))
    return x, -energies[0] * PER_UM_TO_PER_MM, _even_sign(vectors[:, 0]), bound


@lru_cache(maxsize=4096)
def solve_single_mode(material: MaterialContext, profile: ChannelProfile, dn: float,
                      method: ModeMethod = ModeMethod.FINITE_DIFFERENCE,
                      dx_um: float = 0.05, window_um: float = 20.0) -> GuidedMode:
    """Fundamental mode and propagation-constant shift of a single channel.

    The finite-difference solve is repeated at dx/2 and the two shifts are
    Richardson-extrapolated; the reported mode is the fine-grid one.
    Results are cached and must be treated as read-only.

    Args:
        material: Wavelength and substrate index
        profile: Channel shape
        dn: Index contrast of the channel
        method: Discretization
        dx_um: Grid step
        window_um: Evanescent margin beyond the channel edge on each side

    Returns:
        GuidedMode with beta_shift_per_mm > 0

    Raises:
        NoBoundModeError: If the contrast guides no mode
    """
    if method is ModeMethod.FOURIER_GRID:
        x, beta, mode, bound = _single_channel(material, profile, dn, dx_um, window_um, method)
        delta = 0.0
    else:
        _, beta_coarse, _, _ = _single_channel(material, profile, dn, dx_um, window_um, method)
        x, beta_fine, mode, bound = _single_channel(material, profile, dn, dx_um / 2.0, window_um, method)
        delta = beta_fine - beta_coarse
        beta = (4.0 * beta_fine - beta_coarse) / 3.0
        if abs(delta) > RICHARDSON_TOLERANCE * abs(beta):
            logger.warning("Mode solve for dn=%.3e not converged: grid refinement moves beta by %.3e mm^-1",
                           dn, delta)

    if bound > 1:
        logger.warning("Channel with dn=%.3e guides more than one mode", dn)
    logger.debug("dn=%.4e: beta shift %.6f mm^-1 (%d bound)", dn, beta, bound)
    return GuidedMode(beta_shift_per_mm=float(beta), x_um=x, profile=mode,
                      bound_modes=bound, richardson_delta_per_mm=float(delta))


def beta_shift(material: MaterialContext, profile: ChannelProfile, dn: float, dx_um: float = 0.05) -> float:
    """Propagation-constant shift of a single channel (mm^-1)."""
    return solve_single_mode(material, profile, float(dn), ModeMethod.FINITE_DIFFERENCE, dx_um).beta_shift_per_mm


def mode_on_grid(material: MaterialContext, profile: ChannelProfile, dn: float,
                 x_um: np.ndarray, center_um: float, window_um: float = 20.0) -> np.ndarray:
    """Fourier-grid fundamental mode of one channel sampled on a beam grid.

    The eigenproblem is solved on the grid points within window_um of the
    channel edges; the mode is zero elsewhere and has unit power.

    Raises:
        NoBoundModeError: If the contrast guides no mode
    """
    inside = np.abs(x_um - center_um) <= profile.half_width_um + window_um
    x_local = x_um[inside]
    energies, vectors = lowest_states(x_local, dn * channel_g(profile, x_local - center_um),
                                      material, 1, ModeMethod.FOURIER_GRID)
    if energies[0] >= 0:
        raise NoBoundModeError(f"contrast {dn:.3e} guides no mode", target=dn)
    mode = np.zeros(len(x_um))
    mode[inside] = _even_sign(vectors[:, 0])
    return mode


def pair_constants(material: MaterialContext, profile: ChannelProfile, dn_a: float, dn_b: float,
                   d_um: float, dx_um: float = 0.05, window_um: float = 20.0) -> Tuple[float, float, float, float]:
    """Supermode and isolated propagation constants of a two-channel pair.

    Channels sit at -d/2 (contrast dn_a) and +d/2 (contrast dn_b); every
    solve shares one finite-difference grid so discretization errors cancel
    in differences.

    Returns:
        (beta_even, beta_odd, beta_a, beta_b) in mm^-1
    """
    x = symmetric_grid(0.5 * d_um + profile.half_width_um + window_um, dx_um)
    centers = (-0.5 * d_um, 0.5 * d_um)
    energies, _ = lowest_states(x, channels_profile(profile, centers, (dn_a, dn_b), x), material, 2)
    if energies[0] >= 0:
        raise NoBoundModeError(f"pair with contrasts {dn_a:.3e}, {dn_b:.3e} guides no mode", target=dn_a)

    norm_scale = 4.0 * material.diffraction_coefficient_um / dx_um ** 2 + max(dn_a, dn_b) / material.lambdabar_um
    resolution = 1e3 * np.finfo(float).eps * norm_scale * PER_UM_TO_PER_MM
    beta_even, beta_odd = -energies * PER_UM_TO_PER_MM
    if beta_even - beta_odd < resolution:
        raise CouplingResolutionError(
            f"supermode splitting {beta_even - beta_odd:.3e} mm^-1 below resolution at d={d_um} um", target=d_um)

    if dn_a == dn_b:
        beta_a = beta_b = 0.5 * (beta_even + beta_odd)
    else:
        isolated = []
        for center, dn in zip(centers, (dn_a, dn_b)):
            single, _ = lowest_states(x, dn * channel_g(profile, x - center), material, 1)
            isolated.append(-single[0] * PER_UM_TO_PER_MM)
        beta_a, beta_b = isolated
    return float(beta_even), float(beta_odd), float(beta_a), float(beta_b)


def array_hamiltonian(material: MaterialContext, profile: ChannelProfile, positions_um, contrasts,
                      dx_um: float = 0.05, window_um: float = 20.0) -> np.ndarray:
    """Coupled-mode matrix of a whole array from its guided supermodes.

    The N+1 guided supermodes and the isolated mode of every channel are
    solved on one finite-difference grid. The supermodes are projected onto
    the Lowdin-orthonormalized channel modes and the projection is made
    unitary (closest orthogonal matrix), so B = Q diag(beta) Q^T has exactly
    the supermode propagation constants. Its diagonal holds the channel
    propagation constants including the shifts induced by the neighbours,
    its first off-diagonal the couplings.

    Args:
        material: Wavelength and substrate index
        profile: Channel shape
        positions_um: Channel centers, centered on x = 0
        contrasts: Index contrast of every channel
        dx_um: Grid step
        window_um: Evanescent margin beyond the outer channel edges

    Returns:
        Symmetric (N+1)x(N+1) matrix in mm^-1

    Raises:
        NoBoundModeError: If the array or one of its channels guides too few modes
    """
    positions = np.asarray(positions_um, dtype=float)
    contrasts = np.asarray(contrasts, dtype=float)
    count = len(positions)
    x = symmetric_grid(float(np.max(np.abs(positions))) + profile.half_width_um + window_um, dx_um)

    energies, supermodes = lowest_states(x, channels_profile(profile, positions, contrasts, x), material, count)
    if energies[-1] >= 0:
        raise NoBoundModeError(f"array guides {int(np.count_nonzero(energies < 0))} of {count} supermodes",
                               target=float(contrasts.min()))

    local = np.empty((count, len(x)))
    for l, (center, dn) in enumerate(zip(positions, contrasts)):
        single, vectors = lowest_states(x, dn * channel_g(profile, x - center), material, 1)
        if single[0] >= 0:
            raise NoBoundModeError(f"contrast {dn:.3e} guides no mode", target=float(dn), index=l)
        local[l] = _even_sign(vectors[:, 0])

    overlaps, rotation = eigh(local @ local.T * dx_um)
    orthonormal = (rotation / np.sqrt(overlaps)) @ rotation.T @ local
    left, _, right = np.linalg.svd(orthonormal @ supermodes * dx_um)
    unitary = left @ right
    betas = -energies * PER_UM_TO_PER_MM
    hamiltonian = unitary @ np.diag(betas) @ unitary.T
    return 0.5 * (hamiltonian + hamiltonian.T)
