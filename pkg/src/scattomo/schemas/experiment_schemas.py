"""Validated JSON configurations of the command-line experiments."""

from __future__ import annotations

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .deconvolution_schemas import KernelConfig
from .hilbert_schemas import UnitaryKind
from .protocol_schemas import PlanKind
from .waveguide_schemas import QuadratureConfig, QubitParams


class Panel(str, Enum):
    A = "a"
    B = "b"
    C = "c"
    D = "d"


class OracleConfig(BaseModel):
    """Random scatterer on a truncated register; the seed comes from the run seed."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode_count: int = Field(default=2, ge=1)
    photon_cutoff: Optional[int] = Field(
        default=None, ge=1, description="n_max; chosen from the largest power when omitted"
    )
    kind: UnitaryKind = UnitaryKind.ELASTIC


class TargetConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    p_modes: tuple[int, ...] = Field(..., min_length=1)
    k_modes: tuple[int, ...] = Field(..., min_length=1)


class LadderConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    factor: float = Field(default=2.0, gt=1.0)
    Z: int = Field(default=2, ge=1, le=12)


class NoiseSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    shots: Optional[int] = Field(default=None, ge=1)
    detector_noise_std: float = Field(default=0.0, ge=0.0)


class ReconstructConfig(BaseModel):
    """End-to-end protocol run against a random oracle."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=7, ge=0)
    oracle: OracleConfig = OracleConfig()
    protocol: PlanKind = PlanKind.ELASTIC
    input_modes: tuple[int, ...] = Field(default=(0, 1), min_length=1)
    power: float = Field(default=0.01, gt=0.0, description="Total |alpha|^2 of the lowest ladder rung")
    magnitudes: Optional[tuple[float, ...]] = Field(
        default=None, description="|alpha_j| per input mode; equal split of `power` when omitted"
    )
    output_modes: tuple[int, ...] = Field(default=(0, 1), min_length=1)
    ports: int = Field(default=2, ge=1, description="Beam-splitter port count N")
    targets: Optional[list[TargetConfig]] = Field(
        default=None, description="Elements to reconstruct; every reachable element when omitted"
    )
    noise: NoiseSettings = NoiseSettings()
    extrapolation: Optional[LadderConfig] = None
    records_path: Optional[str] = Field(
        default=None, description="Externally produced records document to reconstruct instead of simulating"
    )

    @field_validator("magnitudes")
    @classmethod
    def validate_magnitudes(cls, value: Optional[tuple[float, ...]]) -> Optional[tuple[float, ...]]:
        if value is not None and any(m <= 0 for m in value):
            raise ValueError("magnitudes must be > 0")
        return value

    @model_validator(mode="after")
    def check_ports(self) -> "ReconstructConfig":
        if len(self.output_modes) > self.ports:
            raise ValueError(f"not enough ports: {len(self.output_modes)} output modes for N={self.ports} ports")
        for target in self.targets or []:
            if len(target.p_modes) > self.ports:
                raise ValueError(f"not enough ports: target {target.p_modes} needs n={len(target.p_modes)} > N={self.ports}")
            if len(target.k_modes) > len(self.input_modes):
                raise ValueError(f"target {target.k_modes} needs more input modes than the plan has")
        if self.magnitudes is not None and len(self.magnitudes) != len(self.input_modes):
            raise ValueError("one magnitude per input mode")
        register = self.oracle.mode_count
        if any(not 0 <= mode < register for mode in (*self.input_modes, *self.output_modes)):
            raise ValueError(f"modes must lie in 0..{register - 1}")
        if len(set(self.input_modes)) != len(self.input_modes):
            raise ValueError("input modes must be distinct")
        return self


class BoundsPanel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    M: int = Field(default=2, ge=1)
    m: int = Field(default=2, ge=1)
    factor: float = Field(default=1.05, gt=1.0)
    Z_values: tuple[int, ...] = tuple(range(1, 13))
    powers: tuple[float, ...] = Field(
        default=(0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0), min_length=1
    )


class Figure3Config(BaseModel):
    """Parameters of the four two-photon panels, in units of gamma."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=7, ge=0)
    bounds: BoundsPanel = BoundsPanel()
    qubit: QubitParams = QubitParams()
    sigma: float = Field(default=0.8, gt=0.0)
    khat_offset: float = Field(default=1.5, description="khat - omega0")
    delta_half_width: float = Field(default=3.0, gt=0.0)
    surface_step: float = Field(default=0.05, gt=0.0, description="Grid step of the measured |T|^2 surface")
    cross_section_delta_p: float = Field(default=1.5, ge=0.0)
    cross_section_sigmas: tuple[float, float] = (0.4, 0.8)
    deconvolution_step: float = Field(default=0.05, gt=0.0)
    q_max: int = Field(default=40, ge=0, le=100)
    max_gain: float = Field(default=1e12, ge=1.0, description="Noise gain allowed to the deconvolution series")
    margin_sigmas: float = Field(default=12.0, gt=0.0)
    quadrature: QuadratureConfig = QuadratureConfig()

    @model_validator(mode="after")
    def check_cross_section(self) -> "Figure3Config":
        if self.cross_section_delta_p > self.delta_half_width:
            raise ValueError("cross-section delta_p must lie inside the surface")
        if any(s <= 0 for s in self.cross_section_sigmas):
            raise ValueError("cross-section sigmas must be > 0")
        return self


class DeconvolveConfig(BaseModel):
    """Deconvolution of a measured T surface read from CSV."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=7, ge=0)
    kernel: KernelConfig = KernelConfig(sigma=0.8, max_gain=1e12)
    khat: Optional[tuple[float, float]] = Field(
        default=None, description="Output khat interval; every covered point when omitted"
    )
    delta_half_width: Optional[float] = Field(
        default=None, ge=0.0, description="Output square |delta| <= half width; every covered point when omitted"
    )
    require_coverage: bool = True

    @field_validator("khat")
    @classmethod
    def validate_khat(cls, value: Optional[tuple[float, float]]) -> Optional[tuple[float, float]]:
        if value is not None and value[0] > value[1]:
            raise ValueError("khat interval must be ordered")
        return value


class ScalingConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=7, ge=0)
    qubit: QubitParams = QubitParams()
    sigmas: tuple[float, ...] = Field(default=(0.01, 0.0178, 0.0316, 0.0562, 0.1), min_length=2)
    khat_offset: float = 1.5
    delta_half_width: float = Field(default=3.0, gt=0.0)
    delta_step: float = Field(default=0.25, gt=0.0)
    single_photon_sigmas: tuple[float, ...] = Field(default=(0.01, 0.02, 0.04, 0.08), min_length=2)
    single_photon_offset: float = Field(default=0.5, description="k - omega0 of the diagonal element")
    quadrature: QuadratureConfig = QuadratureConfig()


class NoiseDemoConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=7, ge=0)
    oracle: OracleConfig = OracleConfig()
    protocol: PlanKind = PlanKind.ELASTIC
    power: float = Field(default=0.05, gt=0.0)
    ports: int = Field(default=2, ge=1)
    target: TargetConfig = TargetConfig(p_modes=(0, 1), k_modes=(0, 1))
    shots: tuple[int, ...] = Field(default=(1_000, 10_000, 100_000, 1_000_000), min_length=2)
    detector_noise_std: float = Field(default=1.0, ge=0.0)
    repeats: int = Field(default=200, ge=2)

    @model_validator(mode="after")
    def check_ports(self) -> "NoiseDemoConfig":
        if len(self.target.p_modes) > self.ports:
            raise ValueError(f"not enough ports: target needs n={len(self.target.p_modes)} > N={self.ports}")
        register = self.oracle.mode_count
        if any(not 0 <= mode < register for mode in (*self.target.p_modes, *self.target.k_modes)):
            raise ValueError(f"modes must lie in 0..{register - 1}")
        return self


class ImperfectionsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=7, ge=0)
    mode_count: int = Field(default=2, ge=1)
    ports: int = Field(default=2, ge=1)
    target: TargetConfig = TargetConfig(p_modes=(0, 1), k_modes=(0, 1))
    base_power: float = Field(default=0.01, gt=0.0)
    deltas: tuple[float, ...] = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)
    seeds: tuple[int, ...] = tuple(range(10))
    phase_powers: tuple[float, float] = (0.01, 0.04)
    phase_delta: float = Field(default=1e-3, gt=0.0)

    @model_validator(mode="after")
    def check_ports(self) -> "ImperfectionsConfig":
        if len(self.target.p_modes) > self.ports:
            raise ValueError(f"not enough ports: target needs n={len(self.target.p_modes)} > N={self.ports}")
        if any(not 0 <= mode < self.mode_count for mode in (*self.target.p_modes, *self.target.k_modes)):
            raise ValueError(f"modes must lie in 0..{self.mode_count - 1}")
        if len(self.deltas) < 4:
            raise ValueError("at least four deltas are needed for an exponent fit")
        return self


class RunOptions(BaseModel):
    """Command-line flags shared by every command."""

    model_config = ConfigDict(frozen=True)

    config: Optional[str] = None
    seed: Optional[int] = Field(default=None, ge=0)
    out: str = "out"
    threads: Optional[int] = Field(default=None, ge=1)
    panel: Optional[Panel] = None
    surface: Optional[str] = Field(default=None, description="Measured T surface CSV to deconvolve")
