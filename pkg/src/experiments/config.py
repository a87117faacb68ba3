"""
Experiment configuration.

Configs are flat text files of dotted ``section.key = value`` lines with
``#`` comments and units in the key names. The parsed values are validated
by pydantic models; overrides from the command line are applied to the
raw values before validation.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.models.data_models import (
    Absorber, CentroidNormalization, ChannelProfile, GaugeChoice, MaterialContext, ModelParams, Stage
)
from src.models.exceptions import ConfigError

logger = logging.getLogger(__name__)

HASH_EXCLUDE = {"run": {"out_dir", "workers"}}


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return tuple(item.strip() for item in value.split(",") if item.strip())
    return value


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ModelSection(_Section):
    N: int = Field(9, ge=1)
    J_per_mm: float = Field(0.0781, gt=0)
    U_per_mm: Tuple[float, ...] = (0.0, 0.0174, 0.1043)

    split_values = field_validator("U_per_mm", mode="before")(_split_list)

    @field_validator("U_per_mm")
    @classmethod
    def _non_empty(cls, value):
        if not value:
            raise ValueError("at least one U value is required")
        return value


class MaterialSection(_Section):
    wavelength_um: float = Field(0.633, gt=0)
    substrate_index: float = Field(1.45, gt=1)


class ChannelSection(_Section):
    half_width_um: float = Field(2.0, gt=0)
    diffusion_length_um: float = Field(0.3, gt=0)


class DesignSection(_Section):
    dn_ref: float = Field(2e-3, gt=0)
    d_ref_um: float = Field(8.0, gt=0)
    fit_min_um: float = Field(6.5, gt=0)
    fit_max_um: float = Field(9.5, gt=0)
    fit_samples: int = Field(7, ge=4)
    refine_spacing: bool = True
    gauge: GaugeChoice = GaugeChoice.MEAN
    dx_um: float = Field(0.05, gt=0)
    profile_margin_um: float = Field(20.0, ge=0)

    @model_validator(mode="after")
    def _fit_range(self):
        if not self.fit_min_um <= self.d_ref_um <= self.fit_max_um:
            raise ValueError(f"fit range [{self.fit_min_um}, {self.fit_max_um}] um must contain d_ref")
        return self


class EvolveSection(_Section):
    z_end_mm: float = Field(100.0, gt=0)
    dz_mm: float = Field(0.05, gt=0)
    sweep_U_per_mm: Tuple[float, ...] = tuple(round(0.01 * k, 2) for k in range(16))

    split_values = field_validator("sweep_U_per_mm", mode="before")(_split_list)


class TwoBosonSection(_Section):
    U_over_J: Tuple[float, ...] = (0.0, 4.0, 8.0)
    t_end_mm: float = Field(100.0, gt=0)
    dt_mm: float = Field(0.05, gt=0)
    tolerance: float = Field(1e-9, gt=0)

    split_values = field_validator("U_over_J", mode="before")(_split_list)


class BpmSection(_Section):
    n_x: int = Field(2048, gt=1)
    margin_um: float = Field(20.0, ge=20.0)
    dz_um: float = Field(0.5, gt=0)
    z_end_mm: float = Field(100.0, gt=0)
    launch_site: int = Field(0, ge=0)
    trace_interval_mm: float = Field(0.2, gt=0)
    map_interval_mm: float = Field(1.0, gt=0)
    absorber_width_um: float = Field(10.0, ge=0)
    absorber_strength_per_um: float = Field(0.05, ge=0)
    normalization: CentroidNormalization = CentroidNormalization.SPAN
    preview_columns: int = Field(100, ge=10)

    @field_validator("n_x")
    @classmethod
    def _power_of_two(cls, value):
        if value & (value - 1):
            raise ValueError(f"n_x must be a power of two, got {value}")
        return value


class CompareSection(_Section):
    period_tolerance: float = Field(0.05, gt=0)
    max_modal_deviation: float = Field(0.1, gt=0)
    damped_U_per_mm: Tuple[float, ...] = (0.0174,)
    self_trapped_U_per_mm: Tuple[float, ...] = (0.1043,)
    maxima_prominence: float = Field(0.05, gt=0)

    split_values = field_validator("damped_U_per_mm", "self_trapped_U_per_mm", mode="before")(_split_list)


class RunSection(_Section):
    stages: Tuple[Stage, ...] = (Stage.DESIGN, Stage.TIGHT_BINDING, Stage.TWO_BOSON, Stage.BPM,
                                 Stage.COMPARE, Stage.SWEEP)
    out_dir: str = "results"
    workers: int = Field(1, ge=1)

    split_values = field_validator("stages", mode="before")(_split_list)


class ExperimentConfig(_Section):
    """Validated experiment configuration."""
    model: ModelSection = ModelSection()
    material: MaterialSection = MaterialSection()
    channel: ChannelSection = ChannelSection()
    design: DesignSection = DesignSection()
    evolve: EvolveSection = EvolveSection()
    two_boson: TwoBosonSection = TwoBosonSection()
    bpm: BpmSection = BpmSection()
    compare: CompareSection = CompareSection()
    run: RunSection = RunSection()

    @model_validator(mode="after")
    def _cross_section(self):
        if self.bpm.launch_site > self.model.N:
            raise ValueError(f"bpm.launch_site {self.bpm.launch_site} outside 0..{self.model.N}")
        if 2.0 * self.channel.half_width_um >= self.design.fit_min_um:
            raise ValueError("design.fit_min_um must exceed the channel width")
        return self

    @property
    def material_context(self) -> MaterialContext:
        return MaterialContext(self.material.wavelength_um, self.material.substrate_index)

    @property
    def channel_profile(self) -> ChannelProfile:
        return ChannelProfile(self.channel.half_width_um, self.channel.diffusion_length_um)

    @property
    def absorber(self) -> Absorber:
        return Absorber(self.bpm.absorber_width_um, self.bpm.absorber_strength_per_um)

    def params_for(self, U: float) -> ModelParams:
        return ModelParams(self.model.N, self.model.J_per_mm, float(U))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of every result-affecting setting."""
        canonical = json.dumps(self.model_dump(mode="json", exclude=HASH_EXCLUDE),
                               sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def run_directory(self) -> Path:
        return Path(self.run.out_dir) / f"run_{self.config_hash()[:12]}"


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Dict[str, str]]:
    """Raw nested values from flat ``section.key = value`` text.

    Raises:
        ConfigError: On a malformed line or a repeated key
    """
    raw: Dict[str, Dict[str, str]] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, sep, value = content.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{number}: expected 'section.key = value'")
        _assign(raw, key.strip(), value.strip(), f"{source}:{number}")
    return raw


def _assign(raw: Dict[str, Dict[str, str]], key: str, value: str, where: str) -> None:
    section, dot, name = key.partition(".")
    if not dot or not section or not name or "." in name:
        raise ConfigError(f"{where}: key '{key}' is not of the form section.key")
    entries = raw.setdefault(section, {})
    if name in entries:
        raise ConfigError(f"{where}: duplicate key '{key}'")
    entries[name] = value


def apply_overrides(raw: Dict[str, Dict[str, str]], overrides: Iterable[str]) -> Dict[str, Dict[str, str]]:
    """Copy of raw with ``section.key=value`` overrides applied.

    Raises:
        ConfigError: If an override is malformed
    """
    merged = {section: dict(entries) for section, entries in raw.items()}
    for override in overrides:
        key, sep, value = override.partition("=")
        if not sep:
            raise ConfigError(f"override '{override}' is not of the form section.key=value")
        section, dot, name = key.strip().partition(".")
        if not dot or not name:
            raise ConfigError(f"override '{override}' is not of the form section.key=value")
        merged.setdefault(section, {})[name] = value.strip()
        logger.debug("Override %s = %s", key.strip(), value.strip())
    return merged


def validate_config(raw: Dict[str, Dict[str, str]]) -> ExperimentConfig:
    """Build an ExperimentConfig from raw values.

    Raises:
        ConfigError: On unknown keys or failed validation
    """
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}" for error in e.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from e


def load_config(path: Optional[Path] = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Read, override and validate a config file; defaults when path is None.

    Raises:
        ConfigError: If the file cannot be read or the result is invalid
    """
    raw: Dict[str, Dict[str, str]] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        raw = parse_config_text(text, str(path))
    config = validate_config(apply_overrides(raw, overrides))
    logger.info("Loaded config %s (hash %s)", path or "<defaults>", config.config_hash()[:12])
    return config
