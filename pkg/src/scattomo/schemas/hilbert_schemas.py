"""Pydantic models for the truncated Fock-space oracle."""

from __future__ import annotations

import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class UnitaryKind(str, Enum):
    """Families of scatterer unitaries the oracle can generate."""

    ELASTIC = "elastic"
    GENERAL = "general-vacuum-fixing"
    IDENTITY = "identity"


class BasisSpec(BaseModel):
    """Shape of the truncated multimode Fock space.

    Inputs and outputs share one orthonormal register of `mode_count` modes; the
    space keeps every occupation vector with total photon number up to
    `photon_cutoff`.
    """

    model_config = ConfigDict(frozen=True)

    mode_count: int = Field(..., ge=1, description="Number of orthonormal modes M_total")
    photon_cutoff: int = Field(..., ge=1, description="Maximum total photon number n_max")

    @property
    def dimension(self) -> int:
        return math.comb(self.photon_cutoff + self.mode_count, self.mode_count)

    def sector_dimension(self, photons: int) -> int:
        """Number of occupation vectors with exactly `photons` photons."""
        return math.comb(photons + self.mode_count - 1, self.mode_count - 1)


def _frozen_complex(value: object) -> np.ndarray:
    array = np.array(value, dtype=np.complex128)
    array.setflags(write=False)
    return array


class StateVector(BaseModel):
    """Complex amplitudes over the enumerated basis of `basis`."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    basis: BasisSpec
    amplitudes: np.ndarray
    tail_weight: float = Field(default=0.0, ge=0.0, description="Probability discarded by truncation")

    @field_validator("amplitudes", mode="before")
    @classmethod
    def freeze_amplitudes(cls, value: object) -> np.ndarray:
        return _frozen_complex(value)

    @model_validator(mode="after")
    def check_shape(self) -> "StateVector":
        if self.amplitudes.shape != (self.basis.dimension,):
            raise ValueError(
                f"amplitudes shape {self.amplitudes.shape} does not match basis dimension {self.basis.dimension}"
            )
        if not np.all(np.isfinite(self.amplitudes)):
            raise ValueError("amplitudes must be finite")
        return self

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


class TruncatedUnitary(BaseModel):
    """Scatterer unitary restricted to the truncated space; fixes the vacuum."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    basis: BasisSpec
    matrix: np.ndarray
    kind: UnitaryKind

    @field_validator("matrix", mode="before")
    @classmethod
    def freeze_matrix(cls, value: object) -> np.ndarray:
        return _frozen_complex(value)

    @model_validator(mode="after")
    def check_vacuum(self) -> "TruncatedUnitary":
        dim = self.basis.dimension
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match basis dimension {dim}")
        vacuum_column = self.matrix[:, 0]
        if vacuum_column[0] != 1 or np.any(vacuum_column[1:] != 0):
            raise ValueError("unitary must map the vacuum onto itself exactly")
        return self
