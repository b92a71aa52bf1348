"""Pydantic models for Richardson-style power ladders."""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .protocol_schemas import SectorTarget


class PowerLadder(BaseModel):
    """Geometric ladder of laser powers x_q = b^(q-1) |alpha|^2, q = 1..Z."""

    model_config = ConfigDict(frozen=True)

    base_power: float = Field(..., gt=0.0, description="|alpha|^2 of the lowest rung")
    factor: float = Field(..., gt=1.0, description="Ratio b between neighbouring rungs")
    Z: int = Field(..., ge=1, description="Number of rungs and order of the combination")

    @property
    def powers(self) -> tuple[float, ...]:
        return tuple(self.base_power * self.factor**q for q in range(self.Z))

    @property
    def exact_factor(self) -> Fraction:
        """b as the decimal the user wrote, e.g. 1.05 -> 21/20."""
        return Fraction(repr(self.factor))


class WeightVector(BaseModel):
    """Combination weights w_q^(Z) with the exact rationals they were rounded from."""

    model_config = ConfigDict(frozen=True)

    Z: int = Field(..., ge=1)
    b: float = Field(..., gt=1.0)
    weights: tuple[float, ...]
    exact_weights: tuple[tuple[int, int], ...] = Field(..., description="(numerator, denominator) per weight")

    @model_validator(mode="after")
    def check_lengths(self) -> "WeightVector":
        if len(self.weights) != self.Z or len(self.exact_weights) != self.Z:
            raise ValueError(f"expected {self.Z} weights")
        if any(den <= 0 for _, den in self.exact_weights):
            raise ValueError("denominators must be positive")
        return self

    def fractions(self) -> list[Fraction]:
        return [Fraction(num, den) for num, den in self.exact_weights]

    @property
    def condition_number(self) -> float:
        return sum(abs(w) for w in self.weights)


class EstimateLadder(BaseModel):
    """First-order estimates along a ladder and their Z-order combination."""

    model_config = ConfigDict(frozen=True)

    target: SectorTarget
    ladder: PowerLadder
    estimates: tuple[complex, ...]
    combined: complex
    bound: float = Field(..., ge=0.0)
    exact: Optional[complex] = None

    @property
    def error(self) -> Optional[float]:
        return None if self.exact is None else abs(self.combined - self.exact)

    @property
    def first_order_error(self) -> Optional[float]:
        return None if self.exact is None else abs(self.estimates[0] - self.exact)


class BoundRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha2: float
    Z: int
    b: float
    bound: float


class OrderFit(BaseModel):
    """Fitted exponent of the Z-order error against the base power."""

    model_config = ConfigDict(frozen=True)

    Z: int
    slope: float
    points: int
    powers: tuple[float, ...]
    errors: tuple[float, ...]
    within_tolerance: bool
