import numpy as np
import pytest

from src.experiments.outputs import (
    map_preview, read_design_table, read_intensity_map, read_series, u_tag, write_design_table,
    write_intensity_map, write_map_preview, write_series
)
from src.models.data_models import ArrayLayout, ChannelProfile, IntensityMap, LatticeCoefficients, MaterialContext
from src.models.exceptions import ConfigError, LatticeError

DIGEST = "ab" * 32


def small_layout():
    return ArrayLayout(positions_um=np.array([-8.5, 0.0, 8.5]), contrasts=np.array([2.1e-3, 2.0e-3, 2.1e-3]),
                       channel=ChannelProfile(), material=MaterialContext(), reference_spacing_um=8.0,
                       reference_contrast=2e-3, detuning_offset_per_mm=0.01)


def test_series_header_and_values(tmp_path):
    data = np.column_stack((np.linspace(0.0, 1.0, 5), np.cos(np.linspace(0.0, 1.0, 5))))
    path = write_series(tmp_path / "trace.csv", ["z_mm", "P"], data, DIGEST, "trace U=0.0000",
                        "z in mm", {"launch": "0"})
    lines = path.read_text().splitlines()
    assert lines[0] == "# trace U=0.0000"
    assert lines[1] == f"# config_hash={DIGEST}"

    meta, columns, values = read_series(path)
    assert meta["title"] == "trace U=0.0000"
    assert meta["config_hash"] == DIGEST
    assert meta["launch"] == "0"
    assert columns == ["z_mm", "P"]
    assert np.allclose(values, data, rtol=1e-10)


def test_series_column_mismatch(tmp_path):
    with pytest.raises(ValueError):
        write_series(tmp_path / "bad.csv", ["a"], np.zeros((3, 2)), DIGEST, "bad", "none")


def test_missing_series(tmp_path):
    with pytest.raises(ConfigError):
        read_series(tmp_path / "absent.csv")


def test_design_table(tmp_path):
    layout = small_layout()
    path = write_design_table(tmp_path / "design.csv", layout, [0.2, 0.2], [0.05, -0.1, 0.05], 0.0174, DIGEST)
    _, columns, data = read_series(path)
    assert columns == ["l", "x_um", "d_um", "dn", "kappa_per_mm", "V_per_mm"]
    assert np.isnan(data[0, 2]) and np.isnan(data[-1, 4])

    reread = read_design_table(path, ChannelProfile(), MaterialContext())
    assert np.allclose(reread.positions_um, layout.positions_um, rtol=1e-10)
    assert np.allclose(reread.contrasts, layout.contrasts, rtol=1e-10)
    assert reread.detuning_offset_per_mm == pytest.approx(0.01)


def test_design_table_records_deviation_from_targets(tmp_path):
    targets = LatticeCoefficients(kappa=np.array([0.2, 0.25]), V=np.array([0.05, -0.1, 0.06]))
    path = write_design_table(tmp_path / "design.csv", small_layout(), [0.2, 0.2], [0.05, -0.1, 0.05], 0.0174,
                              DIGEST, targets)
    meta, _, _ = read_series(path)
    assert float(meta["max_kappa_deviation"]) == pytest.approx(0.2)
    assert float(meta["max_detuning_residual_per_mm"]) == pytest.approx(0.01)

    meta, _, _ = read_series(write_design_table(tmp_path / "plain.csv", small_layout(), [0.2, 0.2],
                                                [0.05, -0.1, 0.05], 0.0174, DIGEST))
    assert "max_kappa_deviation" not in meta


def test_design_table_is_validated(tmp_path):
    layout = ArrayLayout(positions_um=np.array([0.0, 3.0]), contrasts=np.array([2e-3, 2e-3]),
                         channel=ChannelProfile(), material=MaterialContext(), reference_spacing_um=8.0,
                         reference_contrast=2e-3)
    path = write_design_table(tmp_path / "overlap.csv", layout, [0.3], [0.0, 0.0], 0.0, DIGEST)
    with pytest.raises(LatticeError):
        read_design_table(path, ChannelProfile(), MaterialContext())


def test_intensity_map(tmp_path):
    intensity = np.random.default_rng(3).random((4, 16))
    original = IntensityMap(z_mm=np.linspace(0.0, 3.0, 4), x_um=np.linspace(-10.0, 8.75, 16), intensity=intensity)
    path = write_intensity_map(tmp_path / "map.bin", original, DIGEST)
    assert path.read_bytes().startswith(b"BHMAP1\nnz=4\nnx=16\n")

    meta, restored = read_intensity_map(path)
    assert meta["config_hash"] == DIGEST
    assert np.array_equal(restored.intensity, intensity)
    assert np.allclose(restored.x_um, original.x_um)
    assert np.allclose(restored.z_mm, original.z_mm)


def test_not_a_map(tmp_path):
    path = tmp_path / "map.bin"
    path.write_bytes(b"something else\nEND\n")
    with pytest.raises(ConfigError):
        read_intensity_map(path)
    with pytest.raises(ConfigError):
        read_intensity_map(tmp_path / "absent.bin")


def test_preview(tmp_path):
    intensity = np.zeros((3, 200))
    intensity[1, 0] = 1.0
    preview = map_preview(IntensityMap(np.arange(3.0), np.linspace(-5.0, 5.0, 200), intensity), columns=50)
    assert len(preview) == 3
    assert all(len(line) == len(preview[0]) for line in preview)
    assert "@" in preview[1] and "@" not in preview[0]

    path = write_map_preview(tmp_path / "map.txt", IntensityMap(np.arange(3.0), np.linspace(-5.0, 5.0, 200),
                                                                intensity), DIGEST, 50)
    assert f"config_hash={DIGEST}" in path.read_text()


def test_u_tag():
    assert u_tag(0.0174) == "U0.0174"
    assert u_tag(0.0) == "U0.0000"
