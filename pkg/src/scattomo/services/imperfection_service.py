"""Preparation imperfections injected into input plans and the error laws they follow."""

from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np

from scattomo.exceptions import ImperfectionError, ScatTomoError
from scattomo.schemas.hilbert_schemas import TruncatedUnitary
from scattomo.schemas.imperfection_schemas import (
    ImperfectionSuiteResult,
    PerturbationKind,
    Perturbation,
    PhasePowerResult,
    ScalingRow,
    ScalingStudyResult,
)
from scattomo.schemas.protocol_schemas import InputPlan, PlanEntry, PlanKind, SectorTarget
from scattomo.services import protocol_service

logger = logging.getLogger(__name__)

EXCESS_FLOOR = 1e-12
EXPONENT_TOLERANCE = 0.2
PHASE_LAW_TOLERANCE = 0.3


def _directions(perturbation: Perturbation, shape: tuple[int, int]) -> np.ndarray:
    if perturbation.seed is None:
        return np.full(shape, float(perturbation.direction))
    rng = np.random.default_rng(perturbation.seed)
    return rng.choice([-1.0, 1.0], size=shape)


def _sign_modes(plan: InputPlan, perturbation: Perturbation) -> range | list[int]:
    if perturbation.mode is None:
        return range(1, plan.M)
    if perturbation.mode >= plan.M:
        raise ImperfectionError(f"sign perturbation on mode {perturbation.mode} of a {plan.M}-mode plan")
    return [perturbation.mode]


def perturb_plan(plan: InputPlan, perturbations: Sequence[Perturbation]) -> InputPlan:
    """Recompute entry amplitudes with imperfect signs, power and phases.

    The nominal magnitudes, l and s are kept so the reconstruction still uses
    the intended values; only the prepared amplitudes change.

    Args:
        plan: Nominal plan
        perturbations: Deviations to apply; an empty list returns `plan` itself

    Returns:
        Plan tagged as perturbed

    Raises:
        ImperfectionError: If the power drops to zero or below, or a selector is out of range
    """
    if not perturbations:
        return plan

    power_shift = math.fsum(p.direction * p.magnitude for p in perturbations if p.kind is PerturbationKind.POWER)
    magnitudes = plan.magnitudes
    if power_shift != 0:
        ratio = 1.0 + power_shift / plan.power
        if ratio <= 0:
            raise ImperfectionError(
                f"power deviation {power_shift:g} drives |alpha|^2={plan.power:g} to {plan.power + power_shift:g}"
            )
        magnitudes = tuple(m * math.sqrt(ratio) for m in plan.magnitudes)

    shape = (len(plan.entries), plan.M)
    signs = np.array([entry.s for entry in plan.entries], dtype=float).reshape(shape)
    phases = np.array([plan.phase(entry.l) for entry in plan.entries])
    for perturbation in perturbations:
        if perturbation.kind is PerturbationKind.SIGN:
            directions = _directions(perturbation, shape)
            for j in _sign_modes(plan, perturbation):
                for i, entry in enumerate(plan.entries):
                    if perturbation.branch is None or entry.s[j] == perturbation.branch:
                        signs[i, j] += directions[i, j] * perturbation.magnitude
        elif perturbation.kind is PerturbationKind.PHASE:
            if perturbation.phase_index is not None and plan.kind is PlanKind.GENERAL:
                if perturbation.phase_index > 2 * plan.M:
                    raise ImperfectionError(f"phase index {perturbation.phase_index} outside 1..{2 * plan.M}")
            directions = _directions(perturbation, shape)
            for i, entry in enumerate(plan.entries):
                # elastic entries share one global phase, so every entry is shifted
                if perturbation.phase_index is None or entry.l is None or entry.l == perturbation.phase_index:
                    phases[i] += directions[i, 0] * perturbation.magnitude

    entries = tuple(
        PlanEntry(
            l=entry.l,
            s=entry.s,
            amplitudes=protocol_service.entry_amplitudes(signs[i].tolist(), float(phases[i]), magnitudes),
        )
        for i, entry in enumerate(plan.entries)
    )
    return plan.model_copy(update={"entries": entries, "perturbed": True})


def _estimate(
    oracle: TruncatedUnitary,
    plan: InputPlan,
    target: SectorTarget,
    output_modes: Sequence[int],
    N: int,
    threads: Optional[int] = None,
) -> complex:
    records = protocol_service.simulate_records(oracle, plan, output_modes, N, threads=threads)
    return protocol_service.reconstruct(records, plan, target, N).value


def scaling_study(
    oracle: TruncatedUnitary,
    target: SectorTarget,
    plan: InputPlan,
    kind: PerturbationKind,
    deltas: Sequence[float],
    output_modes: Sequence[int],
    N: int,
    seeds: Sequence[Optional[int]] = (None,),
    mode: Optional[int] = None,
    branch: Optional[int] = None,
    phase_index: Optional[int] = None,
    threads: Optional[int] = None,
) -> ScalingStudyResult:
    """Excess reconstruction error against the size of one kind of imperfection.

    The excess error at each delta is averaged over `seeds` (random per-entry
    directions); a seed of None uses the +1 direction.

    Args:
        oracle: Scatterer unitary
        target: Element to reconstruct
        plan: Nominal plan
        kind: Imperfection to scan
        deltas: Perturbation sizes; the positive ones must span a decade with at least four points
        output_modes: Port assignment
        N: Port count
        seeds: Direction seeds to average over
        mode, branch, phase_index: Selectors passed to each Perturbation

    Returns:
        Table of excess errors with the fitted log-log exponent

    Raises:
        ImperfectionError: If the delta list is too short or narrow
    """
    positive = sorted(d for d in deltas if d > 0)
    if len(positive) < 4 or positive[-1] < 10 * positive[0]:
        raise ImperfectionError("scaling study needs at least four positive deltas spanning one decade")
    try:
        baseline = _estimate(oracle, plan, target, output_modes, N, threads)
        rows = []
        for delta in deltas:
            excess = [
                abs(
                    _estimate(
                        oracle,
                        perturb_plan(
                            plan,
                            [
                                Perturbation(
                                    kind=kind,
                                    magnitude=delta,
                                    seed=seed,
                                    mode=mode,
                                    branch=branch,
                                    phase_index=phase_index,
                                )
                            ],
                        ),
                        target,
                        output_modes,
                        N,
                        threads,
                    )
                    - baseline
                )
                for seed in seeds
            ]
            rows.append(ScalingRow(delta=delta, base_power=plan.power, excess_error=float(np.mean(excess))))
    except ScatTomoError:
        raise
    except Exception as e:
        logger.error(f"Error running {kind.value} scaling study: {e}", exc_info=True)
        raise

    usable = [row for row in rows if row.delta > 0 and row.excess_error >= EXCESS_FLOOR]
    if len(usable) < 2:
        logger.warning(f"{kind.value} study inconclusive: excess error below {EXCESS_FLOOR:g} for every delta")
        return ScalingStudyResult(kind=kind, target=target, base_power=plan.power, rows=tuple(rows), inconclusive=True)

    exponent = float(
        np.polyfit(np.log([r.delta for r in usable]), np.log([r.excess_error for r in usable]), 1)[0]
    )
    logger.info(f"{kind.value} imperfection: excess error ~ delta^{exponent:.3f}")
    return ScalingStudyResult(
        kind=kind,
        target=target,
        base_power=plan.power,
        rows=tuple(rows),
        fitted_exponent=exponent,
        within_tolerance=abs(exponent - 1.0) <= EXPONENT_TOLERANCE,
    )


def phase_power_study(
    oracle: TruncatedUnitary,
    target: SectorTarget,
    powers: tuple[float, float],
    delta: float,
    output_modes: Sequence[int],
    N: int,
    phase_index: Optional[int] = None,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    threads: Optional[int] = None,
) -> PhasePowerResult:
    """Compare the phase-deviation excess error at two powers with the 1/|alpha|^(m-1) law.

    Each seed picks the perturbed phase index (unless fixed) and a direction;
    the median ratio over seeds is reported.

    Raises:
        ImperfectionError: If the powers are not two distinct positive values
    """
    low, high = powers
    if not 0 < low < high:
        raise ImperfectionError(f"phase power study needs two increasing positive powers, got {powers}")
    M = target.m
    input_modes = target.k_modes
    plans = [
        protocol_service.build_input_plan_general(M, protocol_service.equal_magnitudes(M, x), input_modes)
        for x in (low, high)
    ]
    baselines = [_estimate(oracle, plan, target, output_modes, N, threads) for plan in plans]

    ratios, excess_by_power = [], ([], [])
    for seed in seeds:
        rng = np.random.default_rng(seed)
        index = phase_index if phase_index is not None else int(rng.integers(1, 2 * M + 1))
        direction = int(rng.choice([-1, 1]))
        perturbation = Perturbation(
            kind=PerturbationKind.PHASE, magnitude=delta, direction=direction, phase_index=index
        )
        excess = [
            abs(_estimate(oracle, perturb_plan(plan, [perturbation]), target, output_modes, N, threads) - base)
            for plan, base in zip(plans, baselines)
        ]
        excess_by_power[0].append(excess[0])
        excess_by_power[1].append(excess[1])
        ratios.append(excess[1] / excess[0])

    observed = float(np.median(ratios))
    expected = math.sqrt(high / low) ** (1 - target.m)
    deviation = abs(observed / expected - 1.0)
    logger.info(f"Phase deviation error ratio {observed:.4f} vs |alpha|^(1-m) law {expected:.4f}")
    return PhasePowerResult(
        target=target,
        delta=delta,
        powers=(low, high),
        excess_errors=(float(np.median(excess_by_power[0])), float(np.median(excess_by_power[1]))),
        observed_ratio=observed,
        expected_ratio=expected,
        relative_deviation=deviation,
        within_tolerance=deviation <= PHASE_LAW_TOLERANCE,
    )


def imperfection_suite(
    elastic_oracle: TruncatedUnitary,
    general_oracle: TruncatedUnitary,
    target: SectorTarget,
    output_modes: Sequence[int],
    N: int,
    base_power: float,
    deltas: Sequence[float],
    seeds: Sequence[int],
    phase_powers: tuple[float, float],
    phase_delta: float,
    threads: Optional[int] = None,
) -> ImperfectionSuiteResult:
    """Sign and power studies on the elastic protocol, phase studies on the general one."""
    M = target.m
    magnitudes = protocol_service.equal_magnitudes(M, base_power)
    elastic_plan = protocol_service.build_input_plan_elastic(M, magnitudes, target.k_modes)
    general_plan = protocol_service.build_input_plan_general(M, magnitudes, target.k_modes)
    seeded = tuple(seeds) or (None,)

    studies = (
        scaling_study(
            elastic_oracle, target, elastic_plan, PerturbationKind.SIGN, deltas, output_modes, N, seeded, threads=threads
        ),
        scaling_study(
            elastic_oracle, target, elastic_plan, PerturbationKind.POWER, deltas, output_modes, N, threads=threads
        ),
        scaling_study(
            general_oracle, target, general_plan, PerturbationKind.PHASE, deltas, output_modes, N, seeded, threads=threads
        ),
    )
    phase_power = phase_power_study(
        general_oracle, target, phase_powers, phase_delta, output_modes, N, seeds=tuple(seeds) or (0,), threads=threads
    )
    return ImperfectionSuiteResult(studies=studies, phase_power=phase_power)
