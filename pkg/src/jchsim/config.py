"""Run configuration: a YAML key tree validated into domain objects.

Every physical quantity carries its unit in the key name (``_khz``, ``_us``,
``_um``, ``_amu``).  Unknown keys are rejected; a key that differs from a
known one only in its unit suffix gets a dedicated error.  An empty document
yields the two-ion experimental defaults.

A run manifest written by the CLI is itself a valid configuration: its
``config`` entry is read back verbatim.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import analysis, dynamics, model, noise
from .dynamics import InitialStateSpec, PulseSequence, simulation_sequence
from .hilbert import CompositeSpace
from .model import ChainGeometry, JchParams
from .noise import NoiseModel

UNIT_SUFFIXES = ("_khz", "_us", "_um", "_amu")


class ConfigError(ValueError):
    """Invalid configuration document."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeometryConfig(_Section):
    mass_amu: float = Field(model.DEFAULT_MASS_AMU, gt=0)
    nu_khz: float = Field(model.DEFAULT_NU_KHZ, gt=0)
    positions_um: list[float] = [0.0, model.DEFAULT_DISTANCE_UM]


class ModelConfig(_Section):
    n_sites: int = Field(2, ge=1)
    fock_cutoff: int = Field(2, ge=0)
    g_khz: float | list[float] = model.DEFAULT_G_KHZ
    delta_khz: float | list[float] = 0.0
    delta2_khz: Optional[float] = None
    k12_khz: float = Field(model.DEFAULT_K12_KHZ, ge=0)
    k_matrix_khz: Optional[list[list[float]]] = None
    hopping_source: Literal["override", "geometry"] = "override"
    geometry: GeometryConfig = GeometryConfig()

    @model_validator(mode="after")
    def _consistent(self):
        for name in ("g_khz", "delta_khz"):
            value = getattr(self, name)
            if isinstance(value, list) and len(value) != self.n_sites:
                raise ValueError(f"{name} lists {len(value)} values for {self.n_sites} sites")
        if self.delta2_khz is not None and self.n_sites < 2:
            raise ValueError("delta2_khz needs at least two sites")
        if self.k_matrix_khz is not None and len(self.k_matrix_khz) != self.n_sites:
            raise ValueError(f"k_matrix_khz must be {self.n_sites}x{self.n_sites}")
        if self.hopping_source == "geometry" and len(self.geometry.positions_um) != self.n_sites:
            raise ValueError(f"geometry.positions_um lists {len(self.geometry.positions_um)} ions "
                             f"for {self.n_sites} sites")
        return self


class InitConfig(_Section):
    kind: Literal["ground", "bare", "dressed", "superposition", "pulsed"] = "superposition"
    site: int = Field(1, ge=1)
    p: int = Field(1, ge=1)
    branch: Literal["minus", "plus"] = "minus"
    bare_states: list[tuple[int, int]] = []
    carrier_rabi_khz: float = Field(model.DEFAULT_CARRIER_RABI_KHZ, gt=0)
    rsb_rabi_khz: Optional[float] = Field(None, gt=0)
    prep_hopping: bool = True


class SequenceConfig(_Section):
    duration_us: float = Field(dynamics.DEFAULT_DURATION_US, ge=0)
    dt_out_us: float = Field(dynamics.DEFAULT_DT_OUT_US, gt=0)


class NoiseConfig(_Section):
    enabled: bool = True
    nbar: float | list[float] = noise.DEFAULT_NBAR
    intensity_sigma: float = Field(noise.DEFAULT_INTENSITY_SIGMA, ge=0)
    shots: int = Field(noise.DEFAULT_SHOTS, ge=1)
    seed: int = Field(noise.DEFAULT_SEED, ge=0, lt=2 ** 64)
    intensity_correlation: Literal["common", "independent"] = "common"

    @field_validator("nbar")
    @classmethod
    def _non_negative(cls, v):
        if np.any(np.asarray(v, dtype=float) < 0):
            raise ValueError("nbar must be >= 0")
        return v


class AnalysisConfig(_Section):
    window_us: tuple[float, float] = analysis.DEFAULT_WINDOW_US
    site: int = Field(2, ge=1)
    kind: Literal["polariton", "phonon"] = "polariton"
    delta2_list_khz: list[float] = list(analysis.NEGATIVE_DELTAS_KHZ)
    reference_branch: Optional[Literal["minus", "plus"]] = None
    min_range_khz: tuple[float, float] = (-50.0, -10.0)
    grid_step_khz: float = Field(1.0, gt=0)

    @field_validator("window_us")
    @classmethod
    def _ordered(cls, v):
        if v[0] < 0 or v[1] <= v[0]:
            raise ValueError("window_us must satisfy 0 <= start < end")
        return v

    @field_validator("delta2_list_khz")
    @classmethod
    def _non_empty(cls, v):
        if not v:
            raise ValueError("delta2_list_khz must be non-empty")
        return v


class SpectrumConfig(_Section):
    g_khz: float = model.DEFAULT_G_KHZ
    p: int = Field(1, ge=1)
    delta_start_khz: float = -50.0
    delta_stop_khz: float = 50.0
    delta_step_khz: float = Field(1.0, gt=0)


class RunConfig(_Section):
    model: ModelConfig = ModelConfig()
    init: InitConfig = InitConfig()
    sequence: SequenceConfig = SequenceConfig()
    noise: NoiseConfig = NoiseConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    spectrum: SpectrumConfig = SpectrumConfig()
    output: Optional[str] = None

    @model_validator(mode="after")
    def _cross_checks(self):
        m = self.model
        if self.init.site > m.n_sites:
            raise ValueError(f"init.site {self.init.site} exceeds model.n_sites {m.n_sites}")
        if self.analysis.site > m.n_sites:
            raise ValueError(f"analysis.site {self.analysis.site} exceeds model.n_sites {m.n_sites}")
        if self.init.kind != "ground" and m.fock_cutoff < 1:
            raise ValueError("model.fock_cutoff must be >= 1 when an excitation is requested")
        if self.init.kind == "dressed" and self.init.p > m.fock_cutoff:
            raise ValueError(f"init.p = {self.init.p} exceeds model.fock_cutoff {m.fock_cutoff}")
        if self.init.kind == "bare":
            if len(self.init.bare_states) != m.n_sites:
                raise ValueError("init.bare_states needs one [n, s] pair per site")
            for n, s in self.init.bare_states:
                if s not in (0, 1) or not 0 <= n <= m.fock_cutoff:
                    raise ValueError(f"init.bare_states entry [{n}, {s}] outside the truncated space")
        return self

    # -- domain objects ---------------------------------------------------

    def space(self) -> CompositeSpace:
        return CompositeSpace(self.model.n_sites, self.model.fock_cutoff)

    def hopping_matrix(self) -> np.ndarray:
        m = self.model
        if m.hopping_source == "geometry":
            return self.geometry().hopping_matrix()
        if m.k_matrix_khz is not None:
            return np.asarray(m.k_matrix_khz, dtype=float)
        k = np.zeros((m.n_sites, m.n_sites))
        for i in range(m.n_sites - 1):
            k[i, i + 1] = k[i + 1, i] = m.k12_khz
        return k

    def geometry(self) -> ChainGeometry:
        g = self.model.geometry
        return ChainGeometry(g.mass_amu, g.nu_khz, tuple(g.positions_um))

    def params(self) -> JchParams:
        m = self.model
        n = m.n_sites
        g = np.broadcast_to(np.asarray(m.g_khz, dtype=float), (n,)).copy()
        delta = np.broadcast_to(np.asarray(m.delta_khz, dtype=float), (n,)).copy()
        if m.delta2_khz is not None:
            delta[1] = m.delta2_khz
        return JchParams(g, delta, self.hopping_matrix(), nu_khz=m.geometry.nu_khz)

    def init_spec(self) -> InitialStateSpec:
        i = self.init
        return InitialStateSpec(i.kind, i.site, i.p, i.branch, tuple(i.bare_states),
                                i.carrier_rabi_khz, i.rsb_rabi_khz, i.prep_hopping)

    def noise_model(self) -> NoiseModel | None:
        n = self.noise
        if not n.enabled:
            return None
        nbar = tuple(n.nbar) if isinstance(n.nbar, list) else n.nbar
        return NoiseModel(nbar, n.intensity_sigma, n.shots, n.seed, n.intensity_correlation)

    def pulse_sequence(self) -> PulseSequence:
        return simulation_sequence(self.params(), self.sequence.duration_us, self.sequence.dt_out_us)

    def with_overrides(self, **sections: dict[str, Any]) -> "RunConfig":
        """Copy with some section fields replaced, re-validated."""
        data = self.model_dump()
        for section, values in sections.items():
            if isinstance(data.get(section), dict):
                data[section].update(values)
            else:
                data[section] = values
        return parse_mapping(data)


def _known_keys(model_cls: type[BaseModel]) -> dict[str, Any]:
    return dict(model_cls.model_fields)


def _stem(key: str) -> str:
    for suffix in UNIT_SUFFIXES + ("_ms", "_s", "_hz", "_mhz", "_nm", "_mm", "_m", "_kg", "_ns"):
        if key.endswith(suffix):
            return key[: -len(suffix)]
    return key


def _check_unit_suffixes(data: Any, model_cls: type[BaseModel], path: str = "") -> None:
    if not isinstance(data, dict):
        return
    fields = _known_keys(model_cls)
    for key, value in data.items():
        dotted = f"{path}{key}"
        if key not in fields:
            stems = {_stem(f): f for f in fields if _stem(f) != f}
            if _stem(str(key)) in stems and _stem(str(key)) != key:
                raise ConfigError(f"{dotted}: unit-suffix mismatch; expected '{path}{stems[_stem(key)]}'")
            continue
        annotation = fields[key].annotation
        if isinstance(annotation, type) and issubclass(annotation, BaseModel):
            _check_unit_suffixes(value, annotation, dotted + ".")


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        if e["type"] == "extra_forbidden":
            lines.append(f"{loc}: unknown key")
        else:
            lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_mapping(data: Any) -> RunConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    if "manifest_version" in data and "config" in data:
        data = data["config"]
    _check_unit_suffixes(data, RunConfig)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_validation(err)) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML (or JSON) configuration document."""
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as err:
        mark = err.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"syntax error at {where}: {err.problem}") from None
    except yaml.YAMLError as err:
        raise ConfigError(f"syntax error: {err}") from None
    return parse_mapping(data)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"))
