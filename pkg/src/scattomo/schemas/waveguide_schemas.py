"""Pydantic models for the waveguide scatterer, wave packets and sampled surfaces."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from scattomo.config import settings


class QubitParams(BaseModel):
    """Two-level emitter side-coupled to a chiral channel; units of gamma with c = 1."""

    model_config = ConfigDict(frozen=True)

    omega0: float = Field(default=100.0, description="Transition frequency")
    gamma: float = Field(default=1.0, gt=0.0, description="Decay rate into the channel")


class WavePacketSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigma: float = Field(..., gt=0.0, description="Gaussian momentum width")


class TCoordinates(BaseModel):
    """Average/relative coordinates of a two-photon element.

    k_1 = khat - delta_k, k_2 = khat + delta_k and
    p_{1,2} = khat + sum_mismatch / 2 -+ delta_p.
    """

    model_config = ConfigDict(frozen=True)

    khat: float
    delta_k: float = 0.0
    delta_p: float = 0.0
    sum_mismatch: float = Field(default=0.0, description="p_1 + p_2 - k_1 - k_2")

    @field_validator("khat", "delta_k", "delta_p", "sum_mismatch")
    @classmethod
    def validate_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("coordinates must be finite")
        return value

    def to_momenta(self) -> tuple[float, float, float, float]:
        """(k_1, k_2, p_1, p_2)."""
        p_mean = self.khat + self.sum_mismatch / 2.0
        return (
            self.khat - self.delta_k,
            self.khat + self.delta_k,
            p_mean - self.delta_p,
            p_mean + self.delta_p,
        )

    @classmethod
    def from_momenta(cls, k1: float, k2: float, p1: float, p2: float) -> "TCoordinates":
        return cls(
            khat=(k1 + k2) / 2.0,
            delta_k=(k2 - k1) / 2.0,
            delta_p=(p2 - p1) / 2.0,
            sum_mismatch=p1 + p2 - k1 - k2,
        )


class GridAxis(BaseModel):
    """Uniform grid origin + i * step, i = 0..count-1."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    origin: float
    step: float = Field(..., gt=0.0)
    count: int = Field(..., ge=1)

    @classmethod
    def centered(cls, name: str, center: float, half_width: float, step: float) -> "GridAxis":
        """Axis symmetric about `center` covering at least +-half_width."""
        half = max(int(math.ceil(half_width / step - 1e-9)), 0)
        return cls(name=name, origin=center - half * step, step=step, count=2 * half + 1)

    @property
    def values(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.count)

    @property
    def end(self) -> float:
        return self.origin + self.step * (self.count - 1)

    def index_of(self, value: float, atol: float = 1e-9) -> int:
        """Index of the grid point equal to `value`; raises ValueError when off-grid."""
        position = (value - self.origin) / self.step
        index = int(round(position))
        if not 0 <= index < self.count or abs(position - index) * self.step > atol:
            raise ValueError(f"{value} is not a point of axis {self.name}")
        return index


class SampledSurface(BaseModel):
    """Complex function sampled on a product of uniform axes."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    axes: tuple[GridAxis, ...] = Field(..., min_length=1)
    values: np.ndarray
    meta: dict[str, float] = Field(default_factory=dict)

    @field_validator("values", mode="before")
    @classmethod
    def freeze_values(cls, value: object) -> np.ndarray:
        if isinstance(value, dict):
            array = np.array(value["re"], dtype=float) + 1j * np.array(value["im"], dtype=float)
        else:
            array = np.array(value, dtype=np.complex128)
        array.setflags(write=False)
        return array

    @field_serializer("values")
    def split_values(self, values: np.ndarray) -> dict[str, list]:
        return {"re": values.real.tolist(), "im": values.imag.tolist()}

    @model_validator(mode="after")
    def check_shape(self) -> "SampledSurface":
        shape = tuple(axis.count for axis in self.axes)
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} does not match axes {shape}")
        names = [axis.name for axis in self.axes]
        if len(set(names)) != len(names):
            raise ValueError("axis names must be distinct")
        return self

    @property
    def axis_names(self) -> tuple[str, ...]:
        return tuple(axis.name for axis in self.axes)

    def axis(self, name: str) -> GridAxis:
        for axis in self.axes:
            if axis.name == name:
                return axis
        raise KeyError(name)


class QuadratureConfig(BaseModel):
    """Gauss-Hermite order and the convergence check against a higher order."""

    model_config = ConfigDict(frozen=True)

    nodes: int = Field(default_factory=lambda: settings.QUADRATURE_NODES, ge=2)
    check_nodes: Optional[int] = Field(
        default_factory=lambda: settings.QUADRATURE_CHECK_NODES,
        description="Second order compared against `nodes`; None skips the check",
    )
    rtol: float = Field(default_factory=lambda: settings.QUADRATURE_RTOL, gt=0.0)

    @model_validator(mode="after")
    def check_orders(self) -> "QuadratureConfig":
        if self.check_nodes is not None and self.check_nodes <= self.nodes:
            raise ValueError("check_nodes must exceed nodes")
        return self


class ScalingFit(BaseModel):
    """Log-log fit of a quantity against a control parameter."""

    model_config = ConfigDict(frozen=True)

    parameter: str
    quantity: str
    parameters: tuple[float, ...]
    values: tuple[float, ...]
    exponent: float
    expected: float
    tolerance: float
    within_tolerance: bool
