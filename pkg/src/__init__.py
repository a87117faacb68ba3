"""
Bose-Hubbard Waveguide Lattice
------------------------------
Main package for designing and validating waveguide arrays that realize
the two-site Bose-Hubbard model in Fock space.
"""
