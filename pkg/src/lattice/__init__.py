"""
Fock-Space Lattice
------------------
Tight-binding evolution of the two-site Bose-Hubbard model and the
closed-form two-boson solution.
"""

from .fock_core import build_coefficients, evolve, population_imbalance, spectrum
from .two_boson_analytic import closed_form_probs, p_pair, p_right

__all__ = ['build_coefficients', 'evolve', 'population_imbalance', 'spectrum',
           'closed_form_probs', 'p_pair', 'p_right']
