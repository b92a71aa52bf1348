"""JSON documents written (and read back) by the command-line front end.

Complex numbers are always split into `re` / `im` floats.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from .deconvolution_schemas import SeriesPass
from .imperfection_schemas import ImperfectionSuiteResult
from .protocol_schemas import BoundKind, CorrelationRecord, InputPlan, NoiseStudyResult, PlanEntry, PlanKind
from .waveguide_schemas import GridAxis, ScalingFit


class EntryRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    l: Optional[int] = None
    s: tuple[int, ...]
    re: tuple[float, ...]
    im: tuple[float, ...]


class PlanDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: PlanKind
    M: int
    magnitudes: tuple[float, ...]
    modes: tuple[int, ...]
    perturbed: bool = False
    entries: tuple[EntryRow, ...]

    @classmethod
    def from_plan(cls, plan: InputPlan) -> "PlanDocument":
        return cls(
            kind=plan.kind,
            M=plan.M,
            magnitudes=plan.magnitudes,
            modes=plan.modes,
            perturbed=plan.perturbed,
            entries=tuple(
                EntryRow(
                    l=entry.l,
                    s=entry.s,
                    re=tuple(a.real for a in entry.amplitudes),
                    im=tuple(a.imag for a in entry.amplitudes),
                )
                for entry in plan.entries
            ),
        )

    def to_plan(self) -> InputPlan:
        return InputPlan(
            kind=self.kind,
            M=self.M,
            magnitudes=self.magnitudes,
            modes=self.modes,
            perturbed=self.perturbed,
            entries=tuple(
                PlanEntry(l=row.l, s=row.s, amplitudes=tuple(complex(r, i) for r, i in zip(row.re, row.im)))
                for row in self.entries
            ),
        )


class RecordRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    l: Optional[int] = None
    s: tuple[int, ...]
    ports: tuple[int, ...]
    p_modes: tuple[int, ...]
    re: float
    im: float
    shots: Optional[int] = None


class RecordDocument(BaseModel):
    """A plan and its correlation records; real-experiment data can use the same layout."""

    model_config = ConfigDict(frozen=True)

    plan: PlanDocument
    ports: int = Field(..., ge=1)
    records: tuple[RecordRow, ...]

    @classmethod
    def build(cls, plan: InputPlan, ports: int, records: list[CorrelationRecord]) -> "RecordDocument":
        return cls(
            plan=PlanDocument.from_plan(plan),
            ports=ports,
            records=tuple(
                RecordRow(
                    l=r.l, s=r.s, ports=r.ports, p_modes=r.output_modes, re=r.value.real, im=r.value.imag, shots=r.shots
                )
                for r in records
            ),
        )

    def to_records(self) -> list[CorrelationRecord]:
        return [
            CorrelationRecord(
                l=row.l,
                s=row.s,
                ports=row.ports,
                output_modes=row.p_modes,
                value=complex(row.re, row.im),
                shots=row.shots,
            )
            for row in self.records
        ]


class ZOrderRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    Z: int
    factor: float
    re: float
    im: float
    error: float
    bound: float


class EstimateRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_modes: tuple[int, ...]
    k_modes: tuple[int, ...]
    protocol: PlanKind
    power: float
    re: float
    im: float
    exact_re: Optional[float] = None
    exact_im: Optional[float] = None
    error: Optional[float] = Field(default=None, description="Absent for records without an oracle")
    first_order_bound: float
    bound_kind: BoundKind
    within_bound: Optional[bool] = None
    z_order: Optional[ZOrderRow] = None


class ReconstructionDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    ports: int
    noise_shots: Optional[int] = None
    estimates: tuple[EstimateRow, ...]
    all_within_bound: bool


class SurfaceDocument(BaseModel):
    """Header of a surface CSV: its axes, metadata and peak."""

    model_config = ConfigDict(frozen=True)

    csv: str
    quantity: str
    axes: tuple[GridAxis, ...]
    meta: dict[str, float]
    peak_abs2: float
    peak_at: dict[str, float]
    series: Optional[SeriesPass] = Field(default=None, description="Series bookkeeping of a deconvolved surface")


class RunSummary(BaseModel):
    """Metrics and pass flags of a run whose data lives in CSV files."""

    model_config = ConfigDict(frozen=True)

    command: str
    files: tuple[str, ...]
    metrics: dict[str, float] = Field(default_factory=dict)
    checks: dict[str, bool] = Field(default_factory=dict)
    series: tuple[SeriesPass, ...] = ()


class ScalingDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    nonlinear: ScalingFit
    single_photon: ScalingFit


class NoiseDemoDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    result: NoiseStudyResult


class ImperfectionsDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    result: ImperfectionSuiteResult
