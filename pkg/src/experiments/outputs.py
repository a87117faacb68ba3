"""
Result file formats.

Series are comma-separated text with a ``#`` header block carrying the
title, config hash, units and column names; values use a fixed ``%.10e``
format so identical runs give identical bytes. Intensity maps are a
binary grid with a self-describing ASCII header.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.models.data_models import (
    ArrayLayout, ChannelProfile, IntensityMap, LatticeCoefficients, MaterialContext
)
from src.models.exceptions import ConfigError

logger = logging.getLogger(__name__)

VALUE_FORMAT = "%.10e"
MAP_MAGIC = "BHMAP1"
PREVIEW_RAMP = " .:-=+*#%@"


def u_tag(U: float) -> str:
    return f"U{U:.4f}"


def write_series(path: Path, columns: Sequence[str], data, config_hash: str, title: str,
                 units: str, meta: Optional[Dict[str, str]] = None) -> Path:
    """Write a comma-separated table.

    Args:
        path: Destination file
        columns: Column names, units carried in the names
        data: 2-D array with one column per name
        config_hash: Hash of the producing config
        title: First header line
        units: Free-text units line
        meta: Extra ``key=value`` header entries
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[1] != len(columns):
        raise ValueError(f"{len(columns)} columns named but data has {data.shape[1]}")
    header = [title, f"config_hash={config_hash}", f"units: {units}"]
    header += [f"{key}={value}" for key, value in (meta or {}).items()]
    header.append("columns: " + ",".join(columns))
    np.savetxt(path, data, fmt=VALUE_FORMAT, delimiter=",", header="\n".join(header), comments="# ")
    logger.debug("Wrote %s (%d rows)", path, data.shape[0])
    return path


def read_series(path: Path) -> Tuple[Dict[str, str], List[str], np.ndarray]:
    """Header entries, column names and data of a file written by write_series.

    Raises:
        ConfigError: If the file is missing
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"missing upstream output {path}")
    meta: Dict[str, str] = {}
    columns: List[str] = []
    with path.open(encoding="utf-8") as handle:
        for number, line in enumerate(handle):
            if not line.startswith("#"):
                break
            entry = line[1:].strip()
            if number == 0:
                meta["title"] = entry
            elif entry.startswith("columns: "):
                columns = entry[len("columns: "):].split(",")
            elif "=" in entry:
                key, _, value = entry.partition("=")
                meta[key.strip()] = value.strip()
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    return meta, columns, data


def write_design_table(path: Path, layout: ArrayLayout, kappa, V, U: float, config_hash: str,
                       targets: Optional[LatticeCoefficients] = None) -> Path:
    """Per-channel design table with the lattice the layout realizes.

    d_l is the spacing to the previous channel and kappa_l the coupling to
    the next one; both are NaN where no such neighbour exists. Given the
    target lattice, the header also records the largest relative coupling
    deviation and the largest detuning residual.
    """
    n = layout.N
    spacing = np.concatenate(([np.nan], layout.spacings_um))
    coupling = np.concatenate((np.asarray(kappa, dtype=float), [np.nan]))
    data = np.column_stack((np.arange(n + 1), layout.positions_um, spacing, layout.contrasts, coupling, V))
    meta = {
        "U_per_mm": f"{U:.10e}",
        "reference_spacing_um": f"{layout.reference_spacing_um:.10e}",
        "reference_contrast": f"{layout.reference_contrast:.10e}",
        "detuning_offset_per_mm": f"{layout.detuning_offset_per_mm:.10e}",
    }
    if targets is not None:
        meta["max_kappa_deviation"] = f"{np.max(np.abs(np.asarray(kappa) / targets.kappa - 1.0)):.10e}"
        meta["max_detuning_residual_per_mm"] = f"{np.max(np.abs(np.asarray(V) - targets.V)):.10e}"
    return write_series(path, ["l", "x_um", "d_um", "dn", "kappa_per_mm", "V_per_mm"], data, config_hash,
                        f"design table N={n}", "x, d in um; kappa, V in mm^-1; dn dimensionless", meta)


def read_design_table(path: Path, channel: ChannelProfile, material: MaterialContext) -> ArrayLayout:
    """Rebuild and validate the layout stored in a design table."""
    meta, _, data = read_series(path)
    layout = ArrayLayout(positions_um=data[:, 1], contrasts=data[:, 3], channel=channel, material=material,
                         reference_spacing_um=float(meta["reference_spacing_um"]),
                         reference_contrast=float(meta["reference_contrast"]),
                         detuning_offset_per_mm=float(meta["detuning_offset_per_mm"]))
    layout.validate()
    return layout


def write_intensity_map(path: Path, intensity_map: IntensityMap, config_hash: str) -> Path:
    """Binary map: ASCII header lines ending with ``END``, then little-endian float64, z-major."""
    values = np.ascontiguousarray(intensity_map.intensity, dtype="<f8")
    nz, nx = values.shape
    header = [
        MAP_MAGIC,
        f"nz={nz}",
        f"nx={nx}",
        f"x_min_um={intensity_map.x_um[0]:.10e}",
        f"x_max_um={intensity_map.x_um[-1]:.10e}",
        f"z_min_mm={intensity_map.z_mm[0]:.10e}",
        f"z_max_mm={intensity_map.z_mm[-1]:.10e}",
        "dtype=<f8",
        "order=z-major",
        f"config_hash={config_hash}",
        "END",
    ]
    with Path(path).open("wb") as handle:
        handle.write(("\n".join(header) + "\n").encode("ascii"))
        handle.write(values.tobytes(order="C"))
    return path


def read_intensity_map(path: Path) -> Tuple[Dict[str, str], IntensityMap]:
    """Header entries and map of a file written by write_intensity_map.

    Raises:
        ConfigError: If the file is missing or not a map
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"missing upstream output {path}")
    blob = path.read_bytes()
    head, sep, body = blob.partition(b"\nEND\n")
    lines = head.decode("ascii").split("\n")
    if not sep or lines[0] != MAP_MAGIC:
        raise ConfigError(f"{path} is not an intensity map")
    meta = dict(line.split("=", 1) for line in lines[1:])
    nz, nx = int(meta["nz"]), int(meta["nx"])
    intensity = np.frombuffer(body, dtype="<f8").reshape(nz, nx)
    z_mm = np.linspace(float(meta["z_min_mm"]), float(meta["z_max_mm"]), nz)
    x_um = np.linspace(float(meta["x_min_um"]), float(meta["x_max_um"]), nx)
    return meta, IntensityMap(z_mm=z_mm, x_um=x_um, intensity=intensity)


def map_preview(intensity_map: IntensityMap, columns: int = 100) -> List[str]:
    """Character rendering of a map, one line per snapshot, x down-sampled to `columns`."""
    intensity = intensity_map.intensity
    peak = float(intensity.max()) or 1.0
    picks = np.linspace(0, intensity.shape[1] - 1, min(columns, intensity.shape[1])).round().astype(int)
    levels = np.minimum((intensity[:, picks] / peak * len(PREVIEW_RAMP)).astype(int), len(PREVIEW_RAMP) - 1)
    return [f"{z:8.2f} |" + "".join(PREVIEW_RAMP[k] for k in row) + "|"
            for z, row in zip(intensity_map.z_mm, levels)]


def write_map_preview(path: Path, intensity_map: IntensityMap, config_hash: str, columns: int = 100) -> Path:
    lines = [f"# intensity preview, z in mm down, x from {intensity_map.x_um[0]:.2f} to "
             f"{intensity_map.x_um[-1]:.2f} um across", f"# config_hash={config_hash}"]
    Path(path).write_text("\n".join(lines + map_preview(intensity_map, columns)) + "\n", encoding="utf-8")
    return path


def write_report(path: Path, lines: Sequence[str], config_hash: str) -> Path:
    Path(path).write_text("\n".join([f"# config_hash={config_hash}", *lines]) + "\n", encoding="utf-8")
    return path
