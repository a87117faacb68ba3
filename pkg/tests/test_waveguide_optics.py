import numpy as np
import pytest

from conftest import J
from src.lattice.fock_core import build_coefficients
from src.models.data_models import GaugeChoice, ModeMethod, ModelParams
from src.models.exceptions import DesignError, NoBoundModeError, TargetOutOfRangeError
from src.optics.mode_solver import array_hamiltonian, mode_on_grid, pair_constants, solve_single_mode
from src.optics.waveguide_optics import (
    channel_g, coupling_vs_distance, design_spacings, fit_coupling_law, gauge_offset, pair_coupling,
    realized_coefficients, sample_index_profile
)

DN_REF = 2e-3


def test_channel_shape(channel):
    x = np.linspace(-10.0, 10.0, 2001)
    g = channel_g(channel, x)
    assert channel_g(channel, 0.0) == pytest.approx(1.0)
    assert channel_g(channel, 2.0) == pytest.approx(0.5, abs=1e-6)
    assert np.allclose(g, g[::-1])
    assert np.all(np.abs(g[np.abs(x) > 4.0]) < 1e-12)


def test_reference_channel_is_single_mode(material, channel):
    mode = solve_single_mode(material, channel, DN_REF)
    dx = mode.x_um[1] - mode.x_um[0]
    assert mode.beta_shift_per_mm > 0.0
    assert mode.bound_modes == 1
    assert np.sum(mode.profile ** 2) * dx == pytest.approx(1.0, abs=1e-10)
    assert mode.x_um[np.argmax(mode.profile)] == pytest.approx(0.0, abs=dx)
    assert abs(mode.richardson_delta_per_mm) < 1e-3 * mode.beta_shift_per_mm


def test_discretizations_agree(material, channel):
    fd = solve_single_mode(material, channel, DN_REF, ModeMethod.FINITE_DIFFERENCE)
    fgh = solve_single_mode(material, channel, DN_REF, ModeMethod.FOURIER_GRID)
    assert fgh.beta_shift_per_mm == pytest.approx(fd.beta_shift_per_mm, rel=1e-3)


def test_mode_solver_converges_under_grid_refinement(material, channel):
    contrasts = np.linspace(1.5e-3, 2.5e-3, 5)
    coarse = np.array([solve_single_mode(material, channel, dn, dx_um=0.05).beta_shift_per_mm for dn in contrasts])
    fine = np.array([solve_single_mode(material, channel, dn, dx_um=0.025).beta_shift_per_mm for dn in contrasts])
    assert np.all(np.diff(fine) > 0.0)
    assert np.max(np.abs(fine - coarse)) < 1e-4 * np.ptp(fine)


def test_stronger_channel_guides_more_tightly(material, channel):
    weak = solve_single_mode(material, channel, 1.5e-3)
    strong = solve_single_mode(material, channel, 2.5e-3)
    assert strong.beta_shift_per_mm > weak.beta_shift_per_mm


def test_unguided_channel_raises(material, channel):
    with pytest.raises(NoBoundModeError):
        solve_single_mode(material, channel, 0.0)


def test_mode_on_beam_grid(material, channel):
    x = np.linspace(-40.0, 40.0, 1024, endpoint=False)
    dx = x[1] - x[0]
    mode = mode_on_grid(material, channel, DN_REF, x, 10.0)
    assert np.sum(mode ** 2) * dx == pytest.approx(1.0, abs=1e-10)
    assert abs(x[np.argmax(mode)] - 10.0) <= dx
    assert np.all(mode[np.abs(x - 10.0) > 22.0 + dx] == 0.0)


def test_supermode_splitting(material, channel):
    beta_even, beta_odd, beta_a, beta_b = pair_constants(material, channel, DN_REF, DN_REF, 8.0)
    assert beta_even > beta_a == beta_b > beta_odd


def test_reference_coupling_law(coupling):
    distances, kappas, fit = coupling
    assert np.all(np.diff(kappas) < 0)
    assert fit.kappa_at(8.0) == pytest.approx(0.3907, rel=0.10)
    assert fit.gamma_per_um == pytest.approx(0.6, rel=0.15)
    assert fit.residual_rms < 0.05
    assert distances[0] == 6.5 and distances[-1] == 9.5


def test_fit_recovers_exact_exponential():
    d = np.linspace(6.0, 10.0, 9)
    samples = list(zip(d, 0.39 * np.exp(-0.6 * (d - 8.0))))
    fit = fit_coupling_law(samples, 8.0)
    assert fit.kappa0_per_mm == pytest.approx(0.39, rel=1e-10)
    assert fit.gamma_per_um == pytest.approx(0.6, rel=1e-10)
    assert fit.residual_rms < 1e-10


def test_fit_rejects_bad_samples():
    with pytest.raises(DesignError):
        fit_coupling_law([(7.0, 0.5), (8.0, 0.3), (9.0, 0.2)], 8.0)
    with pytest.raises(DesignError):
        fit_coupling_law([(6.0, 0.5), (7.0, 0.4), (8.0, 0.3), (9.0, 0.2)], 12.0)
    with pytest.raises(DesignError) as error:
        fit_coupling_law([(6.0, 0.5), (7.0, 0.0), (8.0, 0.3), (9.0, 0.2)], 8.0)
    assert error.value.index == 1


def test_pair_coupling(material, channel):
    symmetric = pair_coupling(material, channel, DN_REF, DN_REF, 8.0)
    assert symmetric == pytest.approx(coupling_vs_distance(material, channel, DN_REF, 8.0))
    forward = pair_coupling(material, channel, DN_REF, 1.9e-3, 8.0)
    backward = pair_coupling(material, channel, 1.9e-3, DN_REF, 8.0)
    assert forward == pytest.approx(backward, rel=1e-8)
    slightly_detuned = pair_coupling(material, channel, DN_REF, DN_REF * (1 + 1e-3), 8.0)
    assert slightly_detuned == pytest.approx(symmetric, rel=0.02)
    with pytest.raises(TargetOutOfRangeError):
        pair_coupling(material, channel, DN_REF, DN_REF, 4.0)


def test_spacing_design(layouts, reference_fit, channel):
    spacings = layouts[0.0].spacings_um
    assert np.array_equal(spacings, spacings[::-1])
    assert np.all(np.diff(spacings[:5]) < 0)
    assert 8.6 < spacings[0] < 9.1
    assert 7.8 < spacings[4] < 8.2
    with pytest.raises(TargetOutOfRangeError):
        design_spacings(reference_fit, [100.0], channel)
    with pytest.raises(DesignError):
        design_spacings(reference_fit, [0.3], refine=True)


def test_spacings_do_not_depend_on_interaction(layouts):
    for U in (0.0174, 0.1043):
        assert np.allclose(layouts[U].spacings_um, layouts[0.0].spacings_um, atol=1e-9)


def test_layout_is_centered_and_mirror_symmetric(layouts):
    for layout in layouts.values():
        assert np.sum(layout.positions_um) == pytest.approx(0.0, abs=1e-9)
        assert np.array_equal(layout.positions_um, -layout.positions_um[::-1])
        assert np.array_equal(layout.contrasts, layout.contrasts[::-1])


def test_array_matrix_of_a_pair(material, channel):
    hamiltonian = array_hamiltonian(material, channel, [-4.0, 4.0], [DN_REF, DN_REF])
    beta_even, beta_odd, _, _ = pair_constants(material, channel, DN_REF, DN_REF, 8.0)
    assert hamiltonian[0, 1] == pytest.approx(0.5 * (beta_even - beta_odd), rel=1e-8)
    assert hamiltonian[0, 0] == pytest.approx(hamiltonian[1, 1], rel=1e-12)
    assert np.allclose(np.linalg.eigvalsh(hamiltonian), [beta_odd, beta_even], rtol=1e-12)


def test_interaction_free_contrasts_compensate_neighbour_shifts(material, channel, layouts):
    layout = layouts[0.0]
    assert np.allclose(layout.contrasts, DN_REF, rtol=1e-2)
    uniform = array_hamiltonian(material, channel, layout.positions_um, np.full(10, DN_REF))
    corrected = array_hamiltonian(material, channel, layout.positions_um, layout.contrasts)
    kappa_max = np.max(np.diag(corrected, 1))
    assert np.ptp(np.diag(uniform)) > 1e-3 * kappa_max
    assert np.ptp(np.diag(corrected)) <= 2e-3 * kappa_max


def test_realized_lattice_matches_targets(layouts):
    target = build_coefficients(ModelParams(9, J, 0.0))
    kappa, V = realized_coefficients(layouts[0.0])
    assert np.allclose(kappa, target.kappa, rtol=1e-3)
    assert np.allclose(V, 0.0, atol=1e-3 * target.kappa.max())
    assert V.mean() == pytest.approx(0.0, abs=1e-12)

    target = build_coefficients(ModelParams(9, J, 0.1043))
    layout = layouts[0.1043]
    kappa, V = realized_coefficients(layout)
    scale = np.max(np.abs(target.V - gauge_offset(target.V)))
    assert np.allclose(V, target.V, atol=2e-3 * scale)
    assert np.allclose(kappa, kappa[::-1], rtol=1e-9)
    assert layout.contrasts[0] < layout.contrasts[4]


def test_gauge_offset():
    V = [3.0, 1.0, 2.0]
    assert gauge_offset(V, GaugeChoice.MEAN) == pytest.approx(2.0)
    assert gauge_offset(V, GaugeChoice.NONE) == 0.0


def test_sampled_index_profile(layouts):
    layout = layouts[0.1043]
    x, dn = sample_index_profile(layout, margin_um=20.0, dx_um=0.05)
    assert x[0] == pytest.approx(layout.positions_um[0] - 20.0)
    assert x[-1] == pytest.approx(layout.positions_um[-1] + 20.0, abs=0.05)
    assert dn.max() == pytest.approx(layout.contrasts.max(), rel=1e-3)
    assert np.all(dn >= 0.0)
