"""
Experiment stages.

Each ``cmd_*`` function runs one stage for every value configured for it,
writes its files under the run directory of the config and returns a
StageResult with pass/fail against the acceptance thresholds. Independent
per-U runs go through a process pool when ``run.workers > 1``; results are
consumed in submission order so outputs do not depend on scheduling.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from src.experiments.config import ExperimentConfig
from src.experiments.outputs import (
    read_design_table, read_series, u_tag, write_design_table, write_intensity_map, write_map_preview,
    write_report, write_series
)
from src.lattice.fock_core import build_coefficients, evolve, imbalance_sweep, self_imaging_length
from src.lattice.two_boson_analytic import observables, pair_probability_floor
from src.models.data_models import (
    ArrayLayout, BeamRun, CouplingFit, FockState, Grid, ModelParams, Stage, TwoBosonParams
)
from src.optics.bpm import ModalBasis, launch_site, propagate_and_record
from src.optics.waveguide_optics import (
    assemble_array, characterize_coupling, realized_coefficients, sample_index_profile
)
from src.utils.trace_analysis import (
    estimate_period, is_self_trapped, max_deviation, maxima_decrease, relative_error, successive_maxima
)

logger = logging.getLogger(__name__)

SELF_IMAGING_TOLERANCE = 1e-8
ROUND_TRIP_TOLERANCE = 1e-6


@dataclass
class StageResult:
    """Files written by a stage, its report lines and whether every check passed."""
    stage: Stage
    paths: List[Path] = field(default_factory=list)
    summary: List[str] = field(default_factory=list)
    passed: bool = True

    def check(self, condition: bool, description: str) -> None:
        self.summary.append(f"[{'PASS' if condition else 'FAIL'}] {description}")
        if not condition:
            self.passed = False
            logger.warning("Check failed: %s", description)

    def absorb(self, other: "StageResult") -> None:
        """Fold the files, report lines and verdict of an upstream stage into this one."""
        self.paths.extend(other.paths)
        self.summary.extend(f"{other.stage.value}: {line}" for line in other.summary)
        self.passed = self.passed and other.passed


def _map_ordered(function: Callable, workers: int, *iterables: Iterable) -> list:
    if workers <= 1:
        return list(map(function, *iterables))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(function, *iterables))


def _run_directory(config: ExperimentConfig) -> Path:
    directory = config.run_directory()
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _z_grid(z_end: float, step: float) -> np.ndarray:
    return np.linspace(0.0, z_end, int(round(z_end / step)) + 1)


def _listed(U: float, values: Sequence[float]) -> bool:
    return any(np.isclose(U, value, rtol=0.0, atol=1e-12) for value in values)


def _design_one(config: ExperimentConfig, fit: CouplingFit, U: float) -> Tuple[ArrayLayout, np.ndarray, np.ndarray]:
    layout = assemble_array(config.params_for(U), config.material_context, config.channel_profile, fit,
                            config.design.gauge, config.design.refine_spacing, config.design.dx_um)
    kappa, V = realized_coefficients(layout, config.design.dx_um)
    return layout, kappa, V


def cmd_design(config: ExperimentConfig) -> StageResult:
    """Characterize the coupling law and design one array per U.

    Writes the coupling samples with the fitted law, a design table and a
    sampled index profile per U. Every design table is read back and
    re-validated.
    """
    result = StageResult(Stage.DESIGN)
    directory = _run_directory(config)
    digest = config.config_hash()
    design = config.design
    material, profile = config.material_context, config.channel_profile

    distances, kappas, fit = characterize_coupling(material, profile, design.dn_ref, design.d_ref_um,
                                                   design.fit_min_um, design.fit_max_um, design.fit_samples,
                                                   design.dx_um)
    meta = {"kappa0_per_mm": f"{fit.kappa0_per_mm:.10e}", "gamma_per_um": f"{fit.gamma_per_um:.10e}",
            "d_ref_um": f"{fit.d_ref_um:.10e}", "dn_ref": f"{fit.dn_ref:.10e}",
            "residual_rms": f"{fit.residual_rms:.10e}"}
    result.paths.append(write_series(directory / "coupling_fit.csv", ["d_um", "kappa_per_mm", "kappa_fit_per_mm"],
                                     np.column_stack((distances, kappas, fit.kappa_at(distances))), digest,
                                     "coupling versus distance", "d in um; kappa in mm^-1", meta))
    result.summary.append(f"coupling law: kappa0={fit.kappa0_per_mm:.4f} mm^-1, gamma={fit.gamma_per_um:.4f} um^-1, "
                          f"rms residual {fit.residual_rms:.2e}")

    U_values = config.model.U_per_mm
    designs = _map_ordered(_design_one, config.run.workers, [config] * len(U_values), [fit] * len(U_values), U_values)
    for U, (layout, kappa, V) in zip(U_values, designs):
        targets = build_coefficients(config.params_for(U))
        table = write_design_table(directory / f"design_{u_tag(U)}.csv", layout, kappa, V, U, digest, targets)
        x, dn = sample_index_profile(layout, design.profile_margin_um, design.dx_um)
        result.paths.append(table)
        result.paths.append(write_series(directory / f"profile_{u_tag(U)}.csv", ["x_um", "dn"],
                                         np.column_stack((x, dn)), digest, f"index profile U={U:.4f}",
                                         "x in um; dn = n - n_s dimensionless"))
        reread = read_design_table(table, profile, material)
        deviation = max(float(np.max(np.abs(reread.positions_um - layout.positions_um))),
                        float(np.max(np.abs(reread.contrasts - layout.contrasts) / layout.contrasts)))
        result.check(deviation <= ROUND_TRIP_TOLERANCE, f"U={U:.4f}: design table round trip ({deviation:.1e})")
        result.summary.append(f"U={U:.4f}: spacings {layout.spacings_um.min():.4f}..{layout.spacings_um.max():.4f} um, "
                              f"contrasts {layout.contrasts.min():.5e}..{layout.contrasts.max():.5e}")
        kappa_deviation = float(np.max(np.abs(kappa / targets.kappa - 1.0)))
        result.summary.append(f"U={U:.4f}: realized kappa within {kappa_deviation:.2%}, "
                              f"V within {np.max(np.abs(V - targets.V)):.2e} mm^-1 of the targets")
    return result


def _launch_state(config: ExperimentConfig) -> FockState:
    return FockState.basis(config.model.N, config.bpm.launch_site)


def cmd_evolve(config: ExperimentConfig) -> StageResult:
    """Tight-binding traces P(z) and |c_l(z)|^2 for every U."""
    result = StageResult(Stage.TIGHT_BINDING)
    directory = _run_directory(config)
    digest = config.config_hash()
    z = _z_grid(config.evolve.z_end_mm, config.evolve.dz_mm)
    n = config.model.N
    columns = ["z_mm", "P"] + [f"p_{l}" for l in range(n + 1)]

    for U in config.model.U_per_mm:
        coeffs = build_coefficients(config.params_for(U))
        state = _launch_state(config)
        trace = evolve(state, coeffs, z)
        result.paths.append(write_series(directory / f"tb_{u_tag(U)}.csv", columns,
                                         np.column_stack((z, trace.imbalance, trace.probabilities)), digest,
                                         f"tight-binding evolution U={U:.4f}", "z in mm; P and p_l dimensionless"))
        revival = self_imaging_length(coeffs)
        if revival is not None:
            revived = evolve(state, coeffs, [0.0, revival])
            error = float(np.max(np.abs(np.abs(revived.amplitudes[1]) - np.abs(state.c))))
            result.check(error <= SELF_IMAGING_TOLERANCE,
                         f"U={U:.4f}: self-imaging after {revival:.4f} mm (error {error:.1e})")
        if _listed(U, config.compare.self_trapped_U_per_mm):
            result.check(trace.imbalance.min() > 0.0,
                         f"U={U:.4f}: imbalance stays positive (min P={trace.imbalance.min():.4f})")
        result.summary.append(f"U={U:.4f}: min P={trace.imbalance.min():.6f}, period "
                              f"{_format_length(estimate_period(z, trace.imbalance))}, "
                              f"self-trapped={is_self_trapped(trace.imbalance)}")
    return result


def _format_length(value) -> str:
    return "n/a" if value is None else f"{value:.4f} mm"


def cmd_two_boson(config: ExperimentConfig) -> StageResult:
    """Closed-form two-boson observables for every U/J, cross-checked against the lattice evolution."""
    result = StageResult(Stage.TWO_BOSON)
    directory = _run_directory(config)
    digest = config.config_hash()
    J = config.model.J_per_mm
    t = _z_grid(config.two_boson.t_end_mm, config.two_boson.dt_mm)

    for ratio in config.two_boson.U_over_J:
        params = TwoBosonParams(J, ratio * J)
        closed = observables(params, t)
        numeric = evolve(FockState.basis(2, 0), build_coefficients(ModelParams(2, J, params.U)), t)
        discrepancy = float(np.max(np.abs(numeric.probabilities.T - closed.probs)))
        result.paths.append(write_series(directory / f"two_boson_UJ{ratio:g}.csv",
                                         ["t_mm", "p_0", "p_1", "p_2", "p_right", "p_pair"],
                                         np.column_stack((t, closed.probs.T, closed.p_right, closed.p_pair)), digest,
                                         f"two-boson closed forms U/J={ratio:g}", "t in mm; probabilities dimensionless"))
        result.check(discrepancy <= config.two_boson.tolerance,
                     f"U/J={ratio:g}: closed forms match lattice evolution ({discrepancy:.1e})")
        result.summary.append(f"U/J={ratio:g}: pair floor {pair_probability_floor(params):.6f}, "
                              f"observed min p_2 {closed.p_pair.min():.6f}")
    return result


def _load_or_design(config: ExperimentConfig, result: StageResult) -> Dict[float, ArrayLayout]:
    """Layouts from the design tables of the run, designing them first when missing."""
    directory = _run_directory(config)
    tables = {U: directory / f"design_{u_tag(U)}.csv" for U in config.model.U_per_mm}
    if not all(path.exists() for path in tables.values()):
        logger.info("Design tables missing; running design stage first")
        result.absorb(cmd_design(config))
    return {U: read_design_table(path, config.channel_profile, config.material_context) for U, path in tables.items()}


def _propagate_one(config: ExperimentConfig, layout: ArrayLayout) -> BeamRun:
    bpm = config.bpm
    grid = Grid.for_layout(layout, bpm.n_x, bpm.margin_um, bpm.dz_um, bpm.z_end_mm)
    basis = ModalBasis(layout, grid)
    launch = launch_site(layout, grid, bpm.launch_site, basis)
    return propagate_and_record(layout, grid, launch, bpm.trace_interval_mm, bpm.map_interval_mm,
                                config.absorber, bpm.normalization, basis)


def cmd_bpm(config: ExperimentConfig) -> StageResult:
    """Beam propagation through every designed array: traces, intensity maps and previews."""
    result = StageResult(Stage.BPM)
    directory = _run_directory(config)
    digest = config.config_hash()
    layouts = _load_or_design(config, result)
    n = config.model.N
    columns = ["z_mm", "P_centroid", "P_modal", "residual_power", "total_power"] + [f"p_{l}" for l in range(n + 1)]

    U_values = list(layouts)
    runs = _map_ordered(_propagate_one, config.run.workers, [config] * len(U_values), [layouts[U] for U in U_values])
    for U, run in zip(U_values, runs):
        trace = run.trace
        data = np.column_stack((trace.z_mm, trace.p_centroid, trace.p_modal, trace.residual_power,
                                trace.total_power, trace.modal_powers))
        result.paths.append(write_series(directory / f"bpm_{u_tag(U)}.csv", columns, data, digest,
                                         f"beam propagation U={U:.4f}", "z in mm; P, powers dimensionless"))
        result.paths.append(write_intensity_map(directory / f"map_{u_tag(U)}.bin", run.intensity_map, digest))
        result.paths.append(write_map_preview(directory / f"map_{u_tag(U)}.txt", run.intensity_map, digest,
                                              config.bpm.preview_columns))
        result.summary.append(f"U={U:.4f}: final P={trace.p_centroid[-1]:.4f}, "
                              f"power {trace.total_power[0]:.6f} -> {trace.total_power[-1]:.6f}")
    return result


def _modal_deviation(tb_data: np.ndarray, bpm_data: np.ndarray, n: int, z_limit: float) -> float:
    tb_z, bpm_z = tb_data[:, 0], bpm_data[:, 0]
    inside = bpm_z <= z_limit
    return max(max_deviation(bpm_z[inside], bpm_data[inside, 5 + l], tb_z, tb_data[:, 2 + l]) for l in range(n + 1))


def _maxima_text(z: np.ndarray, values: np.ndarray, prominence: float, count: int = 3) -> str:
    _, heights = successive_maxima(z, values, prominence)
    return ", ".join(f"{h:.4f}" for h in heights[:count])


def cmd_compare(config: ExperimentConfig) -> StageResult:
    """Overlay beam-propagation and tight-binding imbalance per U and apply the acceptance thresholds.

    Raises:
        ConfigError: If the evolve or bpm outputs are missing
    """
    result = StageResult(Stage.COMPARE)
    directory = _run_directory(config)
    n = config.model.N
    thresholds = config.compare

    for U in config.model.U_per_mm:
        _, _, tb = read_series(directory / f"tb_{u_tag(U)}.csv")
        _, _, bpm = read_series(directory / f"bpm_{u_tag(U)}.csv")
        tb_z, tb_p, bpm_z, bpm_p = tb[:, 0], tb[:, 1], bpm[:, 0], bpm[:, 1]

        result.summary.append(f"U={U:.4f}: max |P_bpm - P_tb| = {max_deviation(bpm_z, bpm_p, tb_z, tb_p):.4f}")
        tb_period, bpm_period = estimate_period(tb_z, tb_p), estimate_period(bpm_z, bpm_p)
        result.summary.append(f"U={U:.4f}: period tight-binding {_format_length(tb_period)}, "
                              f"beam {_format_length(bpm_period)}")
        result.summary.append(f"U={U:.4f}: maxima tight-binding "
                              f"{_maxima_text(tb_z, tb_p, thresholds.maxima_prominence)}; "
                              f"beam {_maxima_text(bpm_z, bpm_p, thresholds.maxima_prominence)}")

        trapped_tb, trapped_bpm = is_self_trapped(tb_p), is_self_trapped(bpm_p)
        result.check(trapped_tb == trapped_bpm,
                     f"U={U:.4f}: self-trapping agrees (tight-binding {trapped_tb}, beam {trapped_bpm})")
        if _listed(U, thresholds.self_trapped_U_per_mm):
            result.check(trapped_tb and trapped_bpm,
                         f"U={U:.4f}: imbalance stays positive (min P tight-binding {tb_p.min():.4f}, "
                         f"beam {bpm_p.min():.4f})")
        if _listed(U, thresholds.damped_U_per_mm):
            prominence = thresholds.maxima_prominence
            result.check(maxima_decrease(tb_z, tb_p, prominence=prominence),
                         f"U={U:.4f}: tight-binding maxima decrease over the first two periods")
            result.check(maxima_decrease(bpm_z, bpm_p, prominence=prominence),
                         f"U={U:.4f}: beam maxima decrease over the first two periods")

        revival = self_imaging_length(build_coefficients(config.params_for(U)))
        if revival is not None:
            period_ok = tb_period is not None and bpm_period is not None and \
                relative_error(bpm_period, tb_period) <= thresholds.period_tolerance
            result.check(period_ok, f"U={U:.4f}: beam period within {thresholds.period_tolerance:.0%} of tight-binding")
            deviation = _modal_deviation(tb, bpm, n, revival)
            result.check(deviation <= thresholds.max_modal_deviation,
                         f"U={U:.4f}: modal powers track |c_l|^2 over one revival (max deviation {deviation:.4f})")

    result.paths.append(write_report(directory / "report.txt", result.summary, config.config_hash()))
    return result


def cmd_sweep(config: ExperimentConfig) -> StageResult:
    """Minimum and average imbalance across the self-trapping transition."""
    result = StageResult(Stage.SWEEP)
    directory = _run_directory(config)
    z = _z_grid(config.evolve.z_end_mm, config.evolve.dz_mm)
    rows = imbalance_sweep(config.model.N, config.model.J_per_mm, config.evolve.sweep_U_per_mm, z)
    result.paths.append(write_series(directory / "sweep.csv", ["U_per_mm", "min_P", "mean_P"], rows,
                                     config.config_hash(), "imbalance sweep", "U in mm^-1; P dimensionless"))
    trapped = [f"{u:.4f}" for u, low, _ in rows if low > 0]
    result.summary.append(f"self-trapped for U in {{{', '.join(trapped)}}} mm^-1" if trapped
                          else "no self-trapping in the swept range")
    return result


STAGE_COMMANDS: Dict[Stage, Callable[[ExperimentConfig], StageResult]] = {
    Stage.DESIGN: cmd_design,
    Stage.TIGHT_BINDING: cmd_evolve,
    Stage.TWO_BOSON: cmd_two_boson,
    Stage.BPM: cmd_bpm,
    Stage.COMPARE: cmd_compare,
    Stage.SWEEP: cmd_sweep,
}


def run_stages(config: ExperimentConfig, stages: Sequence[Stage]) -> List[StageResult]:
    """Run the requested stages in pipeline order."""
    results = []
    for stage in STAGE_COMMANDS:
        if stage in stages:
            logger.info("Running stage %s", stage.value)
            results.append(STAGE_COMMANDS[stage](config))
            for line in results[-1].summary:
                logger.info("  %s", line)
    return results


def run_all(config: ExperimentConfig) -> List[StageResult]:
    return run_stages(config, config.run.stages)
