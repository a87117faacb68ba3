from pathlib import Path

import numpy as np
import pytest

from src.experiments import runner
from src.experiments.cli import EXIT_ERROR, EXIT_PASS, EXIT_THRESHOLD, build_parser, main
from src.experiments.outputs import read_intensity_map, read_series
from src.experiments.runner import StageResult
from src.models.data_models import Stage

QUICK = ["--no-log-file", "--override", "evolve.z_end_mm=50"]
SMALL_ARRAY = ["model.N=2", "model.U_per_mm=0", "bpm.n_x=512", "bpm.dz_um=1.0", "bpm.z_end_mm=45",
               "evolve.z_end_mm=45"]


def overrides(*items):
    return [argument for item in items for argument in ("--override", item)]


def run_directory(out):
    directories = list(out.glob("run_*"))
    assert len(directories) == 1
    return directories[0]


def test_parser_rejects_unknown_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["fabricate"])


def test_evolve_writes_traces(tmp_path):
    assert main(["evolve", "--out", str(tmp_path), *QUICK]) == EXIT_PASS
    directory = run_directory(tmp_path)
    meta, columns, data = read_series(directory / "tb_U0.0000.csv")
    assert directory.name == f"run_{meta['config_hash'][:12]}"
    assert columns == ["z_mm", "P"] + [f"p_{l}" for l in range(10)]
    assert data[0, 1] == pytest.approx(1.0)
    assert data[-1, 0] == pytest.approx(50.0)
    assert np.allclose(data[:, 2:].sum(axis=1), 1.0, atol=1e-10)
    _, _, trapped = read_series(directory / "tb_U0.1043.csv")
    assert trapped[:, 1].min() > 0.0


def test_reruns_are_byte_identical(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["evolve", "--out", str(first), *QUICK]) == EXIT_PASS
    assert main(["evolve", "--out", str(second), *QUICK]) == EXIT_PASS
    names = sorted(path.name for path in run_directory(first).iterdir())
    assert names == sorted(path.name for path in run_directory(second).iterdir())
    for name in names:
        assert (run_directory(first) / name).read_bytes() == (run_directory(second) / name).read_bytes()


def test_two_boson_and_sweep(tmp_path):
    sweep = overrides("evolve.sweep_U_per_mm=0, 0.15")
    assert main(["two-boson", "--out", str(tmp_path), "--no-log-file", *sweep]) == EXIT_PASS
    assert main(["sweep", "--out", str(tmp_path), "--no-log-file", *sweep]) == EXIT_PASS
    directory = run_directory(tmp_path)
    _, columns, data = read_series(directory / "two_boson_UJ8.csv")
    assert columns == ["t_mm", "p_0", "p_1", "p_2", "p_right", "p_pair"]
    assert data[:, 5].min() >= 0.9 - 1e-9
    _, _, sweep = read_series(directory / "sweep.csv")
    assert sweep[0, 1] < 0.0 < sweep[1, 1]


def test_threshold_failure_exit_code(tmp_path):
    code = main(["two-boson", "--out", str(tmp_path), "--no-log-file", "--override", "two_boson.tolerance=1e-30"])
    assert code == EXIT_THRESHOLD


def test_errors_exit_code(tmp_path):
    assert main(["compare", "--out", str(tmp_path), "--no-log-file"]) == EXIT_ERROR
    assert main(["evolve", "--out", str(tmp_path), "--no-log-file", "--override", "bpm.n_x=1000"]) == EXIT_ERROR
    assert main(["evolve", "--no-log-file", "--config", str(tmp_path / "absent.cfg")]) == EXIT_ERROR


@pytest.mark.slow
def test_design_small_array(tmp_path):
    code = main(["design", "--out", str(tmp_path), "--no-log-file",
                 "--override", "model.N=3", "--override", "model.U_per_mm=0, 0.05"])
    assert code == EXIT_PASS
    directory = run_directory(tmp_path)
    for name in ("coupling_fit.csv", "design_U0.0000.csv", "design_U0.0500.csv", "profile_U0.0500.csv"):
        assert (directory / name).exists()
    meta, _, table = read_series(directory / "design_U0.0000.csv")
    assert table.shape == (4, 6)
    assert np.allclose(table[:3, 4], 0.0781 * np.sqrt([3.0, 4.0, 3.0]), rtol=1e-3)
    assert float(meta["max_kappa_deviation"]) < 1e-3
    assert float(meta["max_detuning_residual_per_mm"]) < 2e-3 * 0.0781 * 2.0
    interacting, _, table = read_series(directory / "design_U0.0500.csv")
    deviation = np.max(np.abs(table[:3, 4] / (0.0781 * np.sqrt([3.0, 4.0, 3.0])) - 1.0))
    assert float(interacting["max_kappa_deviation"]) == pytest.approx(deviation, rel=1e-6)


def test_stage_result_absorbs_upstream_verdict():
    upstream = StageResult(Stage.DESIGN, paths=[Path("design_U0.0000.csv")])
    upstream.check(False, "design table round trip")
    result = StageResult(Stage.BPM)
    result.check(True, "beam ran")
    result.absorb(upstream)
    assert not result.passed
    assert result.paths == [Path("design_U0.0000.csv")]
    assert "design: [FAIL] design table round trip" in result.summary


@pytest.mark.slow
def test_beam_stages_on_small_array(tmp_path):
    arguments = ["--out", str(tmp_path), "--no-log-file", *overrides(*SMALL_ARRAY)]
    assert main(["bpm", *arguments]) == EXIT_PASS
    assert main(["evolve", *arguments]) == EXIT_PASS
    assert main(["compare", *arguments]) == EXIT_PASS

    directory = run_directory(tmp_path)
    for name in ("coupling_fit.csv", "design_U0.0000.csv", "bpm_U0.0000.csv", "map_U0.0000.txt", "report.txt"):
        assert (directory / name).exists()
    meta, intensity_map = read_intensity_map(directory / "map_U0.0000.bin")
    assert intensity_map.intensity.shape == (46, 512)
    assert directory.name == f"run_{meta['config_hash'][:12]}"
    _, columns, beam = read_series(directory / "bpm_U0.0000.csv")
    assert columns[:2] == ["z_mm", "P_centroid"]
    assert beam[0, 1] == pytest.approx(1.0, abs=1e-3)
    report = (directory / "report.txt").read_text()
    assert "[PASS]" in report and "[FAIL]" not in report


@pytest.mark.slow
def test_beam_stage_reports_design_failures(tmp_path, monkeypatch):
    design = runner.cmd_design

    def failing_design(config):
        result = design(config)
        result.check(False, "forced design failure")
        return result

    monkeypatch.setattr(runner, "cmd_design", failing_design)
    arguments = ["--out", str(tmp_path), "--no-log-file", *overrides(*SMALL_ARRAY, "bpm.z_end_mm=2")]
    assert main(["bpm", *arguments]) == EXIT_THRESHOLD
    assert (run_directory(tmp_path) / "design_U0.0000.csv").exists()
