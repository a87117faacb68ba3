"""
Waveguide Optics
----------------
Mode solving, inverse design of waveguide arrays and split-step beam
propagation through them.
"""

from .bpm import (
    BeamPropagator, ModalBasis, centroid_imbalance, launch_site, project_modal_powers, propagate_and_record,
    split_step
)
from .mode_solver import array_hamiltonian
from .waveguide_optics import (
    assemble_array, characterize_coupling, coupling_vs_distance, fit_coupling_law,
    realized_coefficients
)

__all__ = ['BeamPropagator', 'ModalBasis', 'centroid_imbalance', 'launch_site', 'project_modal_powers',
           'propagate_and_record', 'split_step', 'array_hamiltonian', 'assemble_array', 'characterize_coupling',
           'coupling_vs_distance', 'fit_coupling_law', 'realized_coefficients']
