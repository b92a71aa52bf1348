"""Pydantic models for coherent-state input plans, correlation records and estimates."""

from __future__ import annotations

import cmath
import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

AMPLITUDE_RTOL = 1e-12


class PlanKind(str, Enum):
    """Protocol family: all phases and signs, or the number-conserving shortcut."""

    GENERAL = "general"
    ELASTIC = "elastic"


class BoundKind(str, Enum):
    STRICT = "strict"
    HEURISTIC = "heuristic"


class PlanEntry(BaseModel):
    """One coherent-state configuration of a plan."""

    model_config = ConfigDict(frozen=True)

    l: Optional[int] = Field(default=None, description="Global phase index; absent for elastic plans")
    s: tuple[int, ...] = Field(..., min_length=1, description="Relative sign vector, s[0] = +1")
    amplitudes: tuple[complex, ...] = Field(..., min_length=1, description="Prepared alpha per plan mode")

    @field_validator("s")
    @classmethod
    def validate_signs(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if value[0] != 1:
            raise ValueError("first sign must be +1")
        if any(sign not in (1, -1) for sign in value):
            raise ValueError("signs must be +1 or -1")
        return value

    @property
    def key(self) -> tuple[Optional[int], tuple[int, ...]]:
        return (self.l, self.s)


class InputPlan(BaseModel):
    """Full set of coherent inputs a protocol run needs.

    `magnitudes`, `l` and `s` are the nominal (intended) values used by the
    reconstruction; `amplitudes` on each entry are what is actually prepared,
    which differs from the nominal values only on perturbed plans.
    """

    model_config = ConfigDict(frozen=True)

    kind: PlanKind
    M: int = Field(..., ge=1, description="Number of input modes")
    magnitudes: tuple[float, ...]
    modes: tuple[int, ...] = Field(..., description="Register index of each input mode")
    entries: tuple[PlanEntry, ...]
    perturbed: bool = False

    @field_validator("magnitudes")
    @classmethod
    def validate_magnitudes(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if any(not math.isfinite(m) or m <= 0 for m in value):
            raise ValueError("magnitudes must be finite and > 0")
        return value

    @model_validator(mode="after")
    def check_invariants(self) -> "InputPlan":
        if len(self.magnitudes) != self.M or len(self.modes) != self.M:
            raise ValueError("magnitudes and modes need one value per input mode")
        if len(set(self.modes)) != self.M or any(mode < 0 for mode in self.modes):
            raise ValueError("input modes must be distinct non-negative indices")
        for entry in self.entries:
            if len(entry.s) != self.M or len(entry.amplitudes) != self.M:
                raise ValueError("every entry needs one sign and one amplitude per input mode")
        if self.perturbed:
            return self

        expected = 2**self.M * self.M if self.kind is PlanKind.GENERAL else 2 ** (self.M - 1)
        if len(self.entries) != expected or len({entry.key for entry in self.entries}) != expected:
            raise ValueError(f"{self.kind.value} plan with M={self.M} needs {expected} distinct entries")
        for entry in self.entries:
            if self.kind is PlanKind.GENERAL and (entry.l is None or not 1 <= entry.l <= 2 * self.M):
                raise ValueError("general plan entries need a phase index 1..2M")
            if self.kind is PlanKind.ELASTIC and entry.l is not None:
                raise ValueError("elastic plan entries carry no phase index")
            for prepared, nominal in zip(entry.amplitudes, self.nominal_amplitudes(entry)):
                if abs(prepared - nominal) > AMPLITUDE_RTOL * abs(nominal):
                    raise ValueError("entry amplitudes must equal s_j exp(i phi_l) |alpha_j|")
        return self

    @property
    def power(self) -> float:
        """Total mean photon number |alpha|^2 of the nominal plan."""
        return math.fsum(m * m for m in self.magnitudes)

    def phase(self, l: Optional[int]) -> float:
        return 0.0 if l is None else math.pi * l / self.M

    def nominal_amplitudes(self, entry: PlanEntry) -> tuple[complex, ...]:
        rotation = cmath.exp(1j * self.phase(entry.l))
        return tuple(sign * rotation * magnitude for sign, magnitude in zip(entry.s, self.magnitudes))


class NoiseConfig(BaseModel):
    """Shot count and detector noise of a simulated measurement campaign."""

    model_config = ConfigDict(frozen=True)

    shots: Optional[int] = Field(default=None, ge=1, description="Shots per configuration; None means exact")
    detector_noise_std: float = Field(default=0.0, ge=0.0, description="Per-port additive noise scale")
    seed: int = Field(default=0, ge=0)

    @property
    def exact(self) -> bool:
        return self.shots is None


class CorrelationRecord(BaseModel):
    """Measured (or simulated) correlation F_n(l, s) for one port subset."""

    model_config = ConfigDict(frozen=True)

    l: Optional[int] = None
    s: tuple[int, ...]
    ports: tuple[int, ...] = Field(..., min_length=1)
    output_modes: tuple[int, ...] = Field(..., min_length=1)
    value: complex
    shots: Optional[int] = Field(default=None, ge=1)
    noise_meta: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_ports(self) -> "CorrelationRecord":
        if len(self.ports) != len(self.output_modes):
            raise ValueError("one output mode per port")
        if len(set(self.ports)) != len(self.ports):
            raise ValueError("products must use distinct ports")
        return self


class SectorTarget(BaseModel):
    """Scattering-matrix element S_{p-list, k-list} to reconstruct."""

    model_config = ConfigDict(frozen=True)

    p_modes: tuple[int, ...] = Field(..., min_length=1)
    k_modes: tuple[int, ...] = Field(..., min_length=1)

    @field_validator("k_modes")
    @classmethod
    def validate_inputs(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if len(set(value)) != len(value):
            raise ValueError("input modes of a target must be distinct")
        return value

    @property
    def n(self) -> int:
        return len(self.p_modes)

    @property
    def m(self) -> int:
        return len(self.k_modes)


class Estimate(BaseModel):
    """First-order reconstruction of one element with its error bound."""

    model_config = ConfigDict(frozen=True)

    target: SectorTarget
    value: complex
    power: float = Field(..., ge=0.0)
    N: int = Field(..., ge=1)
    first_order_bound: float = Field(..., ge=0.0)
    bound_kind: BoundKind
    protocol: PlanKind


class NoiseStudyRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    shots: int
    mean_re: float
    mean_im: float
    bias: float
    standard_error: float
    estimate_std: float
    unbiased: bool


class NoiseStudyResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    target: SectorTarget
    noiseless_re: float
    noiseless_im: float
    detector_noise_std: float
    repeats: int
    rows: tuple[NoiseStudyRow, ...]
    std_slope: float
    slope_ok: bool
    bias_ok: bool
