"""Pydantic models for the inverse-Gaussian-kernel series."""

from __future__ import annotations

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .waveguide_schemas import SampledSurface


class DeconvolutionMethod(str, Enum):
    """How each series term is applied to gridded data."""

    SPECTRAL = "spectral"
    DIRECT = "direct"


class KernelConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigma: float = Field(..., gt=0.0, description="Packet width the data was blurred with")
    q_max: int = Field(
        default=40, ge=0, le=100, description="Highest Hermite order H_2q; total order over the axes of a 3D pass"
    )
    max_gain: float = Field(
        default=1e7, ge=1.0, description="Largest amplification of any Fourier component of the input"
    )
    series_tol: float = Field(default=1e-8, gt=0.0, description="Last relative increment of a converged series")
    method: DeconvolutionMethod = DeconvolutionMethod.SPECTRAL
    stall_order: int = Field(default=10, ge=1, description="First order at which stalls are detected")
    stall_factor: float = Field(default=1.5, gt=1.0)
    subtract_baseline: bool = True
    margin_sigmas: float = Field(default=12.0, gt=0.0, description="Grid margin used when generating data")
    coverage_sigmas: float = Field(default=6.0, gt=0.0, description="Required grid on each side of a point")


class SeriesPass(BaseModel):
    """Series bookkeeping for a deconvolution over one axis or jointly over several.

    `order` is fixed from the grid before the data are read; `orders_used` is
    smaller only when the increments stall.
    """

    model_config = ConfigDict(frozen=True)

    axes: tuple[str, ...] = Field(..., min_length=1)
    sigmas: tuple[float, ...] = Field(..., min_length=1)
    order: int = Field(..., ge=0, description="Truncation order, total over the axes")
    orders_used: int = Field(..., ge=0)
    increments: tuple[float, ...] = Field(..., description="Relative increment of orders 1..order")
    noise_gain: float = Field(..., ge=1.0, description="Peak Fourier multiplier of the truncated series")
    converged: bool
    stalled: bool = False

    @model_validator(mode="after")
    def check_orders(self) -> "SeriesPass":
        if len(self.sigmas) != len(self.axes):
            raise ValueError("one sigma per axis")
        if len(self.increments) != self.order:
            raise ValueError(f"expected {self.order} increments, got {len(self.increments)}")
        if self.orders_used > self.order:
            raise ValueError("orders_used exceeds the truncation order")
        if self.converged and self.stalled:
            raise ValueError("a stalled series is not converged")
        return self


class DeconvolutionReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    result: SampledSurface
    series: SeriesPass
    warnings: tuple[str, ...] = ()
    coverage_flag: bool = False

    @property
    def converged(self) -> bool:
        return self.series.converged

    @property
    def orders_used(self) -> int:
        return self.series.orders_used


class TRegion(BaseModel):
    """Evaluation points of a recovered Tbar: khat values and a square of relative momenta."""

    model_config = ConfigDict(frozen=True)

    khat: tuple[float, ...] = Field(..., min_length=1)
    delta_half_width: float = Field(default=3.0, ge=0.0)
    step: float = Field(default=0.05, gt=0.0)


class ForwardCheckReport(BaseModel):
    """Blur-then-deconvolve roundtrip of a known nonlinearity."""

    model_config = ConfigDict(frozen=True)

    sigma: float
    q_max: int
    residual: float = Field(..., description="Relative sup-norm error of the recovered Tbar")
    abs2_residual: float = Field(..., description="Relative sup-norm error of |gamma Tbar|^2")
    peak_abs2: float
    orders_used: int
    coverage_flag: bool
    target: float = 0.02
    within_target: bool
    report: Optional[DeconvolutionReport] = None
