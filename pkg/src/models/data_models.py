"""
Data model classes for the Bose-Hubbard waveguide lattice toolkit.
Contains Enum classes and dataclasses for lattice parameters, Fock states,
waveguide array layouts and beam propagation records.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from src.models.exceptions import LatticeError

NORM_TOLERANCE = 1e-10


class Stage(Enum):
    """Pipeline stages that an experiment config can request."""
    DESIGN = "design"
    TIGHT_BINDING = "tight-binding"
    BPM = "bpm"
    TWO_BOSON = "two-boson"
    COMPARE = "compare"
    SWEEP = "sweep"


class ModeMethod(Enum):
    """Discretization used for the single-channel eigenproblem."""
    FINITE_DIFFERENCE = "finite-difference"
    FOURIER_GRID = "fourier-grid"


class CentroidNormalization(Enum):
    """Length that converts the beam centroid into a population imbalance."""
    REFERENCE = "reference"
    SPAN = "span"


class GaugeChoice(Enum):
    """Constant offset removed from detuning targets before contrast design."""
    MEAN = "mean"
    NONE = "none"


@dataclass(frozen=True)
class ModelParams:
    """Two-site Bose-Hubbard parameters.

    Rates are in mm^-1 because evolution time is identified with
    propagation distance z in mm.
    """
    N: int
    J: float
    U: float = 0.0

    def validate(self) -> None:
        """Raise LatticeError unless N >= 1 and J > 0."""
        if self.N < 1:
            raise LatticeError(f"particle number must be >= 1, got N={self.N}")
        if not self.J > 0:
            raise LatticeError(f"hopping rate must be positive, got J={self.J}")
        if not math.isfinite(self.U):
            raise LatticeError(f"interaction must be finite, got U={self.U}")


@dataclass(frozen=True, eq=False)
class LatticeCoefficients:
    """Couplings kappa_0..kappa_{N-1} and detunings V_0..V_N of the Fock lattice (mm^-1)."""
    kappa: np.ndarray
    V: np.ndarray

    @property
    def N(self) -> int:
        return len(self.V) - 1


@dataclass(frozen=True, eq=False)
class FockState:
    """Amplitudes c_l, l = number of bosons in the left well, at coordinate z (mm)."""
    c: np.ndarray
    z: float = 0.0

    @classmethod
    def basis(cls, N: int, l: int, z: float = 0.0) -> "FockState":
        """Return the state with all weight on site l."""
        if not 0 <= l <= N:
            raise LatticeError(f"site {l} outside 0..{N}")
        c = np.zeros(N + 1, dtype=complex)
        c[l] = 1.0
        return cls(c, z)

    @property
    def N(self) -> int:
        return len(self.c) - 1

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.c) ** 2))

    def is_normalized(self, tolerance: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm - 1.0) <= tolerance

    def normalized(self) -> "FockState":
        norm = self.norm
        if norm == 0.0:
            raise LatticeError("cannot normalize a zero-norm state")
        return FockState(self.c / math.sqrt(norm), self.z)


@dataclass(frozen=True, eq=False)
class EvolutionTrace:
    """Sampled tight-binding evolution.

    amplitudes has shape (len(z_grid), N+1); imbalance holds P at each sample.
    """
    z_grid: np.ndarray
    amplitudes: np.ndarray
    imbalance: np.ndarray

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def state_at(self, index: int) -> FockState:
        return FockState(self.amplitudes[index].copy(), float(self.z_grid[index]))


@dataclass(frozen=True)
class TwoBosonParams:
    """Hopping and interaction for the N=2 closed forms (mm^-1)."""
    J: float
    U: float

    @property
    def M(self) -> float:
        return math.sqrt(4.0 * self.J ** 2 + self.U ** 2 / 4.0)


@dataclass(frozen=True, eq=False)
class TwoBosonObservables:
    """Closed-form observables; probs has shape (3,) + shape(t)."""
    t: np.ndarray
    probs: np.ndarray
    p_right: np.ndarray
    p_pair: np.ndarray


@dataclass(frozen=True)
class MaterialContext:
    """Operating wavelength and substrate."""
    wavelength_um: float = 0.633
    substrate_index: float = 1.45

    @property
    def lambdabar_um(self) -> float:
        return self.wavelength_um / (2.0 * math.pi)

    @property
    def diffraction_coefficient_um(self) -> float:
        """Coefficient D of -D d^2/dx^2 once the wave equation is divided by lambdabar."""
        return self.lambdabar_um / (2.0 * self.substrate_index)


@dataclass(frozen=True)
class ChannelProfile:
    """Error-function channel of half-width w smoothed over diffusion length D_x."""
    half_width_um: float = 2.0
    diffusion_length_um: float = 0.3


@dataclass(frozen=True)
class CouplingFit:
    """Exponential law kappa(d) = kappa0 exp[-gamma (d - d_ref)]."""
    kappa0_per_mm: float
    gamma_per_um: float
    d_ref_um: float
    dn_ref: float
    residual_rms: float = 0.0

    def kappa_at(self, d_um):
        return self.kappa0_per_mm * np.exp(-self.gamma_per_um * (np.asarray(d_um) - self.d_ref_um))


@dataclass(frozen=True, eq=False)
class GuidedMode:
    """Fundamental mode of one channel.

    beta_shift_per_mm is the propagation-constant shift above the substrate
    line; profile is L2-normalized on x_um.
    """
    beta_shift_per_mm: float
    x_um: np.ndarray
    profile: np.ndarray
    bound_modes: int = 1
    richardson_delta_per_mm: float = 0.0


@dataclass(frozen=True, eq=False)
class ArrayLayout:
    """Fabrication-ready waveguide array."""
    # pylint: disable=too-many-instance-attributes
    positions_um: np.ndarray
    contrasts: np.ndarray
    channel: ChannelProfile
    material: MaterialContext
    reference_spacing_um: float
    reference_contrast: float
    detuning_offset_per_mm: float = 0.0

    @property
    def N(self) -> int:
        return len(self.positions_um) - 1

    @property
    def spacings_um(self) -> np.ndarray:
        """d_l = x_l - x_{l-1} for l = 1..N."""
        return np.diff(self.positions_um)

    def validate(self) -> None:
        if len(self.positions_um) != len(self.contrasts):
            raise LatticeError("positions and contrasts differ in length")
        if np.any(np.diff(self.positions_um) <= 2.0 * self.channel.half_width_um):
            raise LatticeError("adjacent channels overlap")
        if np.any(self.contrasts <= 0):
            raise LatticeError("index contrasts must be positive")


@dataclass(frozen=True)
class Grid:
    """Uniform periodic transverse grid plus longitudinal stepping, all in um."""
    x_min_um: float
    x_max_um: float
    n_x: int
    dz_um: float
    z_end_um: float

    @classmethod
    def for_layout(cls, layout: ArrayLayout, n_x: int = 2048, margin_um: float = 20.0,
                   dz_um: float = 0.5, z_end_mm: float = 100.0) -> "Grid":
        """Symmetric window covering the array plus a margin on each side."""
        half = 0.5 * float(layout.positions_um[-1] - layout.positions_um[0]) + margin_um
        return cls(-half, half, n_x, dz_um, z_end_mm * 1e3)

    @property
    def dx_um(self) -> float:
        return (self.x_max_um - self.x_min_um) / self.n_x

    @property
    def x_um(self) -> np.ndarray:
        return self.x_min_um + self.dx_um * np.arange(self.n_x)

    @property
    def kx_per_um(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_x, d=self.dx_um)

    @property
    def n_steps(self) -> int:
        return int(round(self.z_end_um / self.dz_um))


@dataclass(frozen=True, eq=False)
class Field:
    """Optical envelope sampled on a Grid at propagation distance z_um."""
    samples: np.ndarray
    z_um: float = 0.0

    def power(self, dx_um: float) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * dx_um)


@dataclass(frozen=True)
class Absorber:
    """Raised-cosine absorbing ramp at both grid edges."""
    width_um: float = 10.0
    strength_per_um: float = 0.05

    @classmethod
    def disabled(cls) -> "Absorber":
        return cls(0.0, 0.0)


@dataclass(frozen=True, eq=False)
class ModalProjection:
    """Per-channel powers of a field.

    powers uses the orthonormalized mode set, raw_powers the bare modes;
    residual is the power outside the guided subspace.
    """
    powers: np.ndarray
    raw_powers: np.ndarray
    residual: float


@dataclass(frozen=True, eq=False)
class BeamTrace:
    """Observables recorded along a beam propagation run."""
    # pylint: disable=too-many-instance-attributes
    z_mm: np.ndarray
    p_centroid: np.ndarray
    p_modal: np.ndarray
    modal_powers: np.ndarray
    raw_powers: np.ndarray
    residual_power: np.ndarray
    total_power: np.ndarray


@dataclass(frozen=True, eq=False)
class IntensityMap:
    """|phi(x, z)|^2 snapshots, shape (len(z_mm), len(x_um))."""
    z_mm: np.ndarray
    x_um: np.ndarray
    intensity: np.ndarray


@dataclass(frozen=True, eq=False)
class BeamRun:
    """Result of propagate_and_record."""
    trace: BeamTrace
    intensity_map: IntensityMap
    final_field: Optional[Field] = None
