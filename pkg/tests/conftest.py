import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.models.data_models import ChannelProfile, GaugeChoice, MaterialContext, ModelParams
from src.optics.waveguide_optics import assemble_array, characterize_coupling

J = 0.0781
U_VALUES = (0.0, 0.0174, 0.1043)


@pytest.fixture(scope="session")
def material():
    return MaterialContext(wavelength_um=0.633, substrate_index=1.45)


@pytest.fixture(scope="session")
def channel():
    return ChannelProfile(half_width_um=2.0, diffusion_length_um=0.3)


@pytest.fixture(scope="session")
def coupling(material, channel):
    """(distances, kappas, fit) at the reference contrast over [6.5, 9.5] um."""
    return characterize_coupling(material, channel, 2e-3, 8.0, 6.5, 9.5, 7)


@pytest.fixture(scope="session")
def reference_fit(coupling):
    return coupling[2]


@pytest.fixture(scope="session")
def layouts(material, channel, reference_fit):
    """Designed N=9 arrays keyed by U."""
    return {U: assemble_array(ModelParams(9, J, U), material, channel, reference_fit, GaugeChoice.MEAN)
            for U in U_VALUES}


def expm_taylor(matrix, squarings=12, terms=30):
    """exp(matrix) by a scaled Taylor series followed by repeated squaring."""
    scaled = matrix / 2.0 ** squarings
    result = np.eye(len(matrix), dtype=complex)
    term = np.eye(len(matrix), dtype=complex)
    for k in range(1, terms):
        term = term @ scaled / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result
