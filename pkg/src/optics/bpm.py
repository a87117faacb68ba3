"""
Pseudospectral split-step beam propagation through a waveguide array.

The paraxial equation  i lambdabar dphi/dz = -(lambdabar^2 / 2 n_s) phi'' + [n_s - n(x)] phi
is advanced by symmetric Strang splitting: half a potential phase, a full
diffraction step in the spectral domain, the second potential half step
and the absorbing mask. Observables of the Fock lattice are recovered
from the field by projection on the channel modes and from the beam
centroid.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import eigh

from src.models.data_models import (
    Absorber, ArrayLayout, BeamRun, BeamTrace, CentroidNormalization, Field, Grid, IntensityMap,
    MaterialContext, ModalProjection
)
from src.models.exceptions import LatticeError, PropagationError
from src.optics.mode_solver import mode_on_grid
from src.optics.profiles import index_profile

logger = logging.getLogger(__name__)

MAX_STEP_PHASE = 0.1
# evanescent window of beam-grid modes; w + window stays inside the 20 um grid margin
MODE_WINDOW_UM = 16.0


def absorber_mask(absorber: Absorber, grid: Grid) -> np.ndarray:
    """Per-step transmission exp(-strength * sin^2 ramp * dz); one in the interior."""
    if absorber.width_um <= 0 or absorber.strength_per_um <= 0:
        return np.ones(grid.n_x)
    x = grid.x_um
    depth = np.maximum(np.maximum(grid.x_min_um + absorber.width_um - x, x - (grid.x_max_um - absorber.width_um)),
                       0.0)
    ramp = np.sin(0.5 * np.pi * np.minimum(depth / absorber.width_um, 1.0)) ** 2
    return np.exp(-absorber.strength_per_um * ramp * grid.dz_um)


def check_step_size(grid: Grid, dn_profile: np.ndarray, material: MaterialContext) -> float:
    """Largest potential phase accumulated in one step; warns above 0.1 rad."""
    phase = float(np.max(np.abs(dn_profile)) * grid.dz_um / material.lambdabar_um)
    if phase > MAX_STEP_PHASE:
        logger.warning("Per-step potential phase %.3f rad exceeds %.1f rad; reduce dz", phase, MAX_STEP_PHASE)
    return phase


class BeamPropagator:
    """Split-step engine for one index landscape on one grid.

    The diffraction transfer factor, the half-step potential screen and the
    absorber mask are computed once and reused for every step.
    """
    def __init__(self, grid: Grid, material: MaterialContext, dn_profile: np.ndarray,
                 absorber: Optional[Absorber] = None):
        self.grid = grid
        self.material = material
        self.dn_profile = np.asarray(dn_profile, dtype=float)
        potential = -self.dn_profile / material.lambdabar_um
        self.half_screen = np.exp(-0.5j * potential * grid.dz_um)
        self.transfer = np.exp(-1j * material.diffraction_coefficient_um * grid.kx_per_um ** 2 * grid.dz_um)
        self.mask = absorber_mask(absorber or Absorber.disabled(), grid)
        self.step_phase = check_step_size(grid, self.dn_profile, material)

    def step(self, samples: np.ndarray) -> np.ndarray:
        """Advance raw samples by one dz."""
        samples = samples * self.half_screen
        samples = np.fft.ifft(self.transfer * np.fft.fft(samples))
        return samples * self.half_screen * self.mask

    def advance(self, field: Field, steps: int = 1) -> Field:
        samples = field.samples
        for _ in range(steps):
            samples = self.step(samples)
        if not np.all(np.isfinite(samples)):
            raise PropagationError(f"non-finite field after {steps} steps from z={field.z_um:.1f} um")
        return Field(samples, field.z_um + steps * self.grid.dz_um)


def split_step(field: Field, dn_profile: np.ndarray, grid: Grid, material: MaterialContext,
               absorber: Optional[Absorber] = None) -> Field:
    """Field at z + dz; stateless wrapper around BeamPropagator."""
    return BeamPropagator(grid, material, dn_profile, absorber).advance(field, 1)


def gaussian_beam(grid: Grid, x0_um: float, sigma_um: float) -> Field:
    """Unit-power Gaussian exp(-(x - x0)^2 / (2 sigma^2)) with flat phase."""
    samples = np.exp(-((grid.x_um - x0_um) ** 2) / (2.0 * sigma_um ** 2)).astype(complex)
    return Field(samples / np.sqrt(np.sum(np.abs(samples) ** 2) * grid.dx_um))


def mirror_field(field: Field) -> Field:
    """phi(-x) on a grid symmetric about zero; sample j maps to (n - j) mod n."""
    n = len(field.samples)
    return Field(field.samples[(-np.arange(n)) % n], field.z_um)


def second_moment(field: Field, grid: Grid) -> float:
    """<(x - <x>)^2> of the intensity."""
    intensity = np.abs(field.samples) ** 2
    total = intensity.sum()
    mean = np.sum(grid.x_um * intensity) / total
    return float(np.sum((grid.x_um - mean) ** 2 * intensity) / total)


def free_gaussian_second_moment(sigma0_um: float, z_um: float, material: MaterialContext) -> float:
    """Analytic <x^2> of a diffracting Gaussian in a uniform medium."""
    spread = 2.0 * material.diffraction_coefficient_um * z_um / sigma0_um ** 2
    return 0.5 * sigma0_um ** 2 * (1.0 + spread ** 2)


def harmonic_index(material: MaterialContext, omega_per_um: float, x_um) -> np.ndarray:
    """Parabolic n(x) - n_s under which Gaussians oscillate rigidly at spatial frequency omega."""
    coefficient = material.diffraction_coefficient_um
    return -material.lambdabar_um * omega_per_um ** 2 * np.asarray(x_um) ** 2 / (4.0 * coefficient)


def harmonic_ground_width(material: MaterialContext, omega_per_um: float) -> float:
    """sigma of the stationary Gaussian exp(-x^2 / 2 sigma^2) of the parabolic profile."""
    return float(np.sqrt(2.0 * material.diffraction_coefficient_um / omega_per_um))


def harmonic_intensity(x_um, x0_um: float, sigma_um: float, omega_per_um: float, z_um: float) -> np.ndarray:
    """Exact intensity of the displaced stationary Gaussian: its centre follows x0 cos(omega z)."""
    center = x0_um * np.cos(omega_per_um * z_um)
    return np.exp(-((np.asarray(x_um) - center) ** 2) / sigma_um ** 2) / (np.sqrt(np.pi) * sigma_um)


def harmonic_reference(material: MaterialContext, grid: Grid, omega_per_um: float,
                       x0_um: float) -> Tuple[np.ndarray, Field, float]:
    """Parabolic index on the grid and its stationary Gaussian displaced to x0.

    Returns:
        (n - n_s samples, unit-power launch field, stationary width sigma in um)
    """
    sigma = harmonic_ground_width(material, omega_per_um)
    return harmonic_index(material, omega_per_um, grid.x_um), gaussian_beam(grid, x0_um, sigma), sigma


class ModalBasis:
    """Fundamental modes of every channel of a layout on a beam grid.

    Neighbouring modes overlap slightly, so projections use the
    symmetrically (Lowdin) orthonormalized set; raw overlaps are kept
    as a diagnostic.
    """
    def __init__(self, layout: ArrayLayout, grid: Grid, window_um: float = MODE_WINDOW_UM):
        self.layout = layout
        self.grid = grid
        self.modes = np.array([
            mode_on_grid(layout.material, layout.channel, float(dn), grid.x_um, float(x), window_um)
            for x, dn in zip(layout.positions_um, layout.contrasts)
        ])
        self.overlap = self.modes @ self.modes.T * grid.dx_um
        eigenvalues, vectors = eigh(self.overlap)
        inverse_root = vectors @ np.diag(eigenvalues ** -0.5) @ vectors.T
        self.orthonormal = inverse_root @ self.modes

    def mode(self, site: int) -> np.ndarray:
        return self.modes[site]


def launch_site(layout: ArrayLayout, grid: Grid, site: int, basis: Optional[ModalBasis] = None) -> Field:
    """Unit-power fundamental mode of channel `site`, i.e. c_m(0) = delta_{m,site}.

    Raises:
        LatticeError: If site is outside 0..N
    """
    if not 0 <= site <= layout.N:
        raise LatticeError(f"launch site {site} outside 0..{layout.N}")
    if basis is not None:
        mode = basis.mode(site)
    else:
        mode = mode_on_grid(layout.material, layout.channel, float(layout.contrasts[site]),
                            grid.x_um, float(layout.positions_um[site]), MODE_WINDOW_UM)
    samples = mode.astype(complex)
    return Field(samples / np.sqrt(np.sum(np.abs(samples) ** 2) * grid.dx_um))


def project_modal_powers(field: Field, basis: ModalBasis) -> ModalProjection:
    """Powers |<mode_l|phi>|^2 and the radiated remainder."""
    dx = basis.grid.dx_um
    powers = np.abs(basis.orthonormal @ field.samples * dx) ** 2
    raw = np.abs(basis.modes @ field.samples * dx) ** 2
    return ModalProjection(powers=powers, raw_powers=raw, residual=field.power(dx) - float(powers.sum()))


def modal_imbalance(powers: np.ndarray) -> float:
    """sum_l [(N-2l)/N] p_l normalized by the guided power."""
    n = len(powers) - 1
    total = float(np.sum(powers))
    if total == 0.0:
        raise PropagationError("no guided power to form an imbalance")
    return float(np.sum((n - 2.0 * np.arange(n + 1)) / n * powers)) / total


def centroid_imbalance(field: Field, layout: ArrayLayout, grid: Grid,
                       normalization: CentroidNormalization = CentroidNormalization.REFERENCE) -> float:
    """P = 1 - 2 <x - x_0> / L from the beam center of mass.

    L is N d_ref for REFERENCE and x_N - x_0 for SPAN; x_0 is the launch-edge channel.

    Raises:
        PropagationError: If the field carries no power
    """
    intensity = np.abs(field.samples) ** 2
    total = float(intensity.sum())
    if total == 0.0:
        raise PropagationError("centroid of a zero-power field")
    centroid = float(np.sum(grid.x_um * intensity)) / total
    x0 = float(layout.positions_um[0])
    if normalization is CentroidNormalization.SPAN:
        length = float(layout.positions_um[-1]) - x0
    else:
        length = layout.N * layout.reference_spacing_um
    return 1.0 - 2.0 * (centroid - x0) / length


def propagate_and_record(layout: ArrayLayout, grid: Grid, launch: Field, trace_interval_mm: float = 0.2,
                         map_interval_mm: float = 1.0, absorber: Optional[Absorber] = None,
                         normalization: CentroidNormalization = CentroidNormalization.REFERENCE,
                         basis: Optional[ModalBasis] = None) -> BeamRun:
    """Propagate a launched field to grid.z_end_um, recording observables and intensity snapshots.

    Returns:
        BeamRun with the trace (z in mm), the intensity map and the final field

    Raises:
        PropagationError: If the field becomes non-finite
    """
    dn = index_profile(layout, grid.x_um)
    propagator = BeamPropagator(grid, layout.material, dn, absorber)
    basis = basis or ModalBasis(layout, grid)
    trace_every = max(1, int(round(trace_interval_mm * 1e3 / grid.dz_um)))
    map_every = max(1, int(round(map_interval_mm * 1e3 / grid.dz_um)))
    logger.info("Propagating N=%d array over %.1f mm in %d steps (dz=%.3f um, nx=%d)",
                layout.N, grid.z_end_um / 1e3, grid.n_steps, grid.dz_um, grid.n_x)

    rows = []
    snapshots, snapshot_z = [], []
    samples = launch.samples
    for step in range(grid.n_steps + 1):
        z_um = launch.z_um + step * grid.dz_um
        if step % trace_every == 0 or step == grid.n_steps:
            if not np.all(np.isfinite(samples)):
                raise PropagationError(f"non-finite field at z={z_um / 1e3:.3f} mm (step {step})")
            field = Field(samples, z_um)
            projection = project_modal_powers(field, basis)
            rows.append((z_um / 1e3, centroid_imbalance(field, layout, grid, normalization),
                         modal_imbalance(projection.powers), projection.powers, projection.raw_powers,
                         projection.residual, field.power(grid.dx_um)))
        if step % map_every == 0:
            snapshots.append(np.abs(samples) ** 2)
            snapshot_z.append(z_um / 1e3)
        if step < grid.n_steps:
            samples = propagator.step(samples)

    trace = BeamTrace(
        z_mm=np.array([r[0] for r in rows]),
        p_centroid=np.array([r[1] for r in rows]),
        p_modal=np.array([r[2] for r in rows]),
        modal_powers=np.array([r[3] for r in rows]),
        raw_powers=np.array([r[4] for r in rows]),
        residual_power=np.array([r[5] for r in rows]),
        total_power=np.array([r[6] for r in rows]),
    )
    drift = float(abs(trace.total_power[-1] - trace.total_power[0]))
    logger.info("Propagation done: power drift %.2e, final P=%.4f", drift, trace.p_centroid[-1])
    intensity_map = IntensityMap(z_mm=np.array(snapshot_z), x_um=grid.x_um, intensity=np.array(snapshots))
    final = Field(samples, launch.z_um + grid.n_steps * grid.dz_um)
    return BeamRun(trace=trace, intensity_map=intensity_map, final_field=final)
