"""Pydantic models for preparation imperfections and their scaling studies."""

from __future__ import annotations

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .protocol_schemas import SectorTarget


class PerturbationKind(str, Enum):
    SIGN = "sign"
    POWER = "power"
    PHASE = "phase"


class Perturbation(BaseModel):
    """One preparation deviation applied to an input plan.

    sign: s_j -> s_j + direction * magnitude on plan mode `mode` (every mode
        but the first when None), restricted to entries whose s_j equals `branch`.
    power: |alpha|^2 -> |alpha|^2 + direction * magnitude, all magnitudes rescaled.
    phase: phi_l -> phi_l + direction * magnitude for l = `phase_index` (all
        entries when None).
    With `seed` set, each affected entry draws its own random direction.
    """

    model_config = ConfigDict(frozen=True)

    kind: PerturbationKind
    magnitude: float = Field(..., ge=0.0)
    direction: int = 1
    mode: Optional[int] = Field(default=None, ge=0)
    branch: Optional[int] = None
    phase_index: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = Field(default=None, ge=0)

    @field_validator("direction")
    @classmethod
    def validate_direction(cls, value: int) -> int:
        if value not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        return value

    @field_validator("branch")
    @classmethod
    def validate_branch(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value not in (1, -1):
            raise ValueError("branch must be +1, -1 or absent")
        return value


class ScalingRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    delta: float
    base_power: float
    excess_error: float


class ScalingStudyResult(BaseModel):
    """Excess reconstruction error against perturbation size."""

    model_config = ConfigDict(frozen=True)

    kind: PerturbationKind
    target: SectorTarget
    base_power: float
    rows: tuple[ScalingRow, ...]
    fitted_exponent: Optional[float] = None
    inconclusive: bool = False
    within_tolerance: bool = False


class PhasePowerResult(BaseModel):
    """Excess error of a phase deviation at two laser powers against the 1/|alpha|^(m-1) law."""

    model_config = ConfigDict(frozen=True)

    target: SectorTarget
    delta: float
    powers: tuple[float, float]
    excess_errors: tuple[float, float]
    observed_ratio: float
    expected_ratio: float
    relative_deviation: float
    within_tolerance: bool


class ImperfectionSuiteResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    studies: tuple[ScalingStudyResult, ...]
    phase_power: PhasePowerResult
