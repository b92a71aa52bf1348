"""Coherent-state input plans, correlation records and the reconstruction formulas."""

from __future__ import annotations

import cmath
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Optional, Sequence

import numpy as np

from scattomo.config import settings
from scattomo.exceptions import ProtocolError, ScatTomoError
from scattomo.schemas.hilbert_schemas import BasisSpec, TruncatedUnitary, UnitaryKind
from scattomo.schemas.protocol_schemas import (
    BoundKind,
    CorrelationRecord,
    Estimate,
    InputPlan,
    NoiseConfig,
    NoiseStudyResult,
    NoiseStudyRow,
    PlanEntry,
    PlanKind,
    SectorTarget,
)
from scattomo.services import hilbert_service

logger = logging.getLogger(__name__)

# Per-port vacuum noise of a simultaneous quadrature (X + iP) measurement
VACUUM_PORT_VARIANCE = 0.5

RecordKey = tuple[Optional[int], tuple[int, ...], tuple[int, ...]]


def equal_magnitudes(M: int, power: float) -> tuple[float, ...]:
    """Split a total power evenly: |alpha_j| = |alpha| / sqrt(M)."""
    if M < 1 or power <= 0:
        raise ProtocolError(f"need M >= 1 and power > 0, got M={M}, power={power}")
    return (math.sqrt(power / M),) * M


def sign_vectors(M: int) -> list[tuple[int, ...]]:
    """All sign vectors with s_1 = +1, '+' before '-' in each position."""
    return [(1, *rest) for rest in itertools.product((1, -1), repeat=M - 1)]


def entry_amplitudes(
    signs: Sequence[float], phase: float, magnitudes: Sequence[float]
) -> tuple[complex, ...]:
    """Amplitudes s_j exp(i phase) |alpha_j| of one plan entry."""
    rotation = cmath.exp(1j * phase)
    return tuple(sign * rotation * magnitude for sign, magnitude in zip(signs, magnitudes))


def _validate_plan_args(M: int, magnitudes: Sequence[float], modes: Optional[Sequence[int]]) -> tuple[int, ...]:
    if M < 1:
        raise ProtocolError(f"plan needs at least one input mode, got M={M}")
    if len(magnitudes) != M:
        raise ProtocolError(f"expected {M} magnitudes, got {len(magnitudes)}")
    if any(magnitude <= 0 for magnitude in magnitudes):
        raise ProtocolError("every input magnitude must be > 0; a zero magnitude makes the reconstruction singular")
    return tuple(range(M)) if modes is None else tuple(modes)


def build_input_plan_general(
    M: int, magnitudes: Sequence[float], modes: Optional[Sequence[int]] = None
) -> InputPlan:
    """Plan with 2M global phases pi*l/M and all 2^(M-1) sign vectors per phase.

    Args:
        M: Number of input modes
        magnitudes: |alpha_{k_j}| per input mode
        modes: Register indices of the input modes (default 0..M-1)

    Returns:
        Plan with 2^M * M entries

    Raises:
        ProtocolError: If a magnitude is zero or the sizes disagree
    """
    modes = _validate_plan_args(M, magnitudes, modes)
    magnitudes = tuple(float(m) for m in magnitudes)
    entries = [
        PlanEntry(l=l, s=s, amplitudes=entry_amplitudes(s, math.pi * l / M, magnitudes))
        for l in range(1, 2 * M + 1)
        for s in sign_vectors(M)
    ]
    return InputPlan(kind=PlanKind.GENERAL, M=M, magnitudes=magnitudes, modes=modes, entries=tuple(entries))


def build_input_plan_elastic(
    M: int, magnitudes: Sequence[float], modes: Optional[Sequence[int]] = None
) -> InputPlan:
    """Plan with one entry per sign vector and no global phase (2^(M-1) entries)."""
    modes = _validate_plan_args(M, magnitudes, modes)
    magnitudes = tuple(float(m) for m in magnitudes)
    entries = [PlanEntry(l=None, s=s, amplitudes=entry_amplitudes(s, 0.0, magnitudes)) for s in sign_vectors(M)]
    return InputPlan(kind=PlanKind.ELASTIC, M=M, magnitudes=magnitudes, modes=modes, entries=tuple(entries))


def build_input_plan(
    kind: PlanKind, M: int, magnitudes: Sequence[float], modes: Optional[Sequence[int]] = None
) -> InputPlan:
    if PlanKind(kind) is PlanKind.GENERAL:
        return build_input_plan_general(M, magnitudes, modes)
    return build_input_plan_elastic(M, magnitudes, modes)


def port_subsets(port_count: int) -> list[tuple[int, ...]]:
    """Non-empty ordered subsets of the ports, smallest first."""
    return [
        subset for size in range(1, port_count + 1) for subset in itertools.combinations(range(port_count), size)
    ]


def _entry_rng(seed: int, entry: PlanEntry, subset_index: int) -> np.random.Generator:
    l_code = 0 if entry.l is None else entry.l
    s_code = sum(1 << j for j, sign in enumerate(entry.s) if sign < 0)
    return np.random.default_rng(np.random.SeedSequence([seed, l_code, s_code, subset_index]))


def _complex_normal(rng: np.random.Generator, variance: float) -> complex:
    scale = math.sqrt(max(variance, 0.0) / 2.0)
    return complex(scale * rng.standard_normal(), scale * rng.standard_normal())


def _entry_records(
    oracle: TruncatedUnitary,
    plan: InputPlan,
    entry: PlanEntry,
    output_modes: tuple[int, ...],
    N: int,
    noise: NoiseConfig,
) -> list[CorrelationRecord]:
    spec = oracle.basis
    alphas = np.zeros(spec.mode_count, dtype=np.complex128)
    for mode, amplitude in zip(plan.modes, entry.amplitudes):
        alphas[mode] = amplitude
    state = hilbert_service.coherent_state(spec, alphas)
    scattered = oracle.matrix @ state.amplitudes

    port_photons = [
        float(np.linalg.norm(hilbert_service.annihilation_operator(spec, mode) @ scattered) ** 2)
        for mode in output_modes
    ]
    records = []
    for subset_index, ports in enumerate(port_subsets(len(output_modes))):
        modes = tuple(output_modes[r] for r in ports)
        lowered = scattered
        for mode in modes:
            lowered = hilbert_service.annihilation_operator(spec, mode) @ lowered
        scale = float(N) ** (-len(modes) / 2.0)
        value = scale * complex(np.vdot(scattered, lowered))
        meta: dict[str, float] = {}

        if not noise.exact:
            # Per-shot moments of the product of port outcomes; beam-splitter port outcome
            # B_r carries N^-1 <A^dagger A> signal power plus vacuum and detector noise.
            signal = [port_photons[r] / N for r in ports]
            quantum = scale**2 * max(float(np.vdot(lowered, lowered).real) - abs(value / scale) ** 2, 0.0)
            with_vacuum = math.prod(s + VACUUM_PORT_VARIANCE for s in signal)
            stat_variance = quantum + with_vacuum - math.prod(signal)
            std = noise.detector_noise_std
            det_variance = math.prod(s + VACUUM_PORT_VARIANCE + std * std for s in signal) - with_vacuum

            rng = _entry_rng(noise.seed, entry, subset_index)
            shots = float(noise.shots)
            value += _complex_normal(rng, stat_variance / shots) + _complex_normal(rng, det_variance / shots)
            meta = {
                "detector_noise_std": std,
                "stat_std": math.sqrt(stat_variance / shots),
                "detector_std": math.sqrt(det_variance / shots),
            }

        records.append(
            CorrelationRecord(
                l=entry.l,
                s=entry.s,
                ports=ports,
                output_modes=modes,
                value=value,
                shots=noise.shots,
                noise_meta=meta,
            )
        )
    return records


def simulate_records(
    oracle: TruncatedUnitary,
    plan: InputPlan,
    output_modes: Sequence[int],
    N: int,
    noise: Optional[NoiseConfig] = None,
    threads: Optional[int] = None,
) -> list[CorrelationRecord]:
    """Simulate the beam-splitter correlations F_n(l, s) for every plan entry.

    One record is produced per entry and per non-empty subset of the assigned
    ports, so a single record set serves every p-list up to the port count.

    Args:
        oracle: Scatterer unitary on the truncated register
        plan: Coherent input configurations
        output_modes: Register mode filtered by each assigned port
        N: Number of beam-splitter ports
        noise: Shot count and detector noise; exact records when omitted
        threads: Worker threads (settings default)

    Returns:
        Records ordered by plan entry, then by port subset

    Raises:
        ProtocolError: If there are not enough ports or modes fall outside the register
    """
    noise = noise or NoiseConfig()
    output_modes = tuple(output_modes)
    try:
        if not output_modes:
            raise ProtocolError("at least one output mode must be assigned")
        if N < 1 or len(output_modes) > N:
            raise ProtocolError(f"not enough ports: {len(output_modes)} output modes assigned to N={N} ports")
        mode_count = oracle.basis.mode_count
        if any(not 0 <= mode < mode_count for mode in (*output_modes, *plan.modes)):
            raise ProtocolError(f"plan or output modes fall outside the {mode_count}-mode register")

        workers = threads or settings.THREADS
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_entry = list(
                pool.map(lambda entry: _entry_records(oracle, plan, entry, output_modes, N, noise), plan.entries)
            )
        records = [record for batch in per_entry for record in batch]
        logger.info(
            f"Simulated {len(records)} records for {len(plan.entries)} {plan.kind.value} entries "
            f"({'exact' if noise.exact else f'{noise.shots} shots'})"
        )
        return records
    except ScatTomoError:
        raise
    except Exception as e:
        logger.error(f"Error simulating correlation records: {e}", exc_info=True)
        raise


def first_order_bound(M: int, m: int, power: float) -> float:
    """Strict elastic error bound M^(3m/2) (exp(|alpha|^2) - 1)."""
    if power < 0:
        raise ProtocolError(f"power must be >= 0, got {power}")
    return float(M) ** (1.5 * m) * math.expm1(power)


def phase_delta_check(R: int, d: int, m: int) -> complex:
    """(1/R) sum_{l=1..R} exp(2 pi i l (d - m) / R): 1 when d = m mod R, else 0."""
    if R < 1:
        raise ProtocolError(f"R must be >= 1, got {R}")
    phases = 2j * np.pi * np.arange(1, R + 1) * (d - m) / R
    return complex(np.sum(np.exp(phases)) / R)


def _index_records(records: Iterable[CorrelationRecord]) -> dict[RecordKey, complex]:
    table: dict[RecordKey, complex] = {}
    for record in records:
        table.setdefault((record.l, record.s, tuple(sorted(record.output_modes))), record.value)
    return table


def _validate_target(plan: InputPlan, target: SectorTarget, N: int) -> list[int]:
    if target.m > plan.M:
        raise ProtocolError(f"target has m={target.m} input photons but the plan has M={plan.M} modes")
    if target.n > N:
        raise ProtocolError(f"not enough ports: target has n={target.n} output photons for N={N} ports")
    positions = []
    for mode in target.k_modes:
        if mode not in plan.modes:
            raise ProtocolError(f"target input mode {mode} is not one of the plan modes {plan.modes}")
        positions.append(plan.modes.index(mode))
    if 0 not in positions:
        raise ProtocolError(f"target input modes must include the reference mode {plan.modes[0]}")
    return positions


def estimate_bound(plan: InputPlan, target: SectorTarget, N: int) -> float:
    """First-order bound for a target, scaled for unequal input magnitudes.

    Equals first_order_bound(M, m, |alpha|^2) for equal magnitudes and N <= M.
    """
    positions = _validate_target(plan, target, N)
    balanced = math.sqrt(plan.power / plan.M) ** target.m
    imbalance = balanced / math.prod(plan.magnitudes[j] for j in positions)
    return first_order_bound(max(plan.M, N), target.m, plan.power) * imbalance


def _reconstruct(
    records: Iterable[CorrelationRecord], plan: InputPlan, target: SectorTarget, N: int, prefactor: float
) -> complex:
    positions = _validate_target(plan, target, N)
    table = _index_records(records)
    p_key = tuple(sorted(target.p_modes))
    missing = [entry.key for entry in plan.entries if (entry.l, entry.s, p_key) not in table]
    if missing:
        raise ProtocolError(f"missing records for p-modes {p_key} at (l, s) = {missing}")

    total = 0j
    for entry in plan.entries:
        nominal = plan.nominal_amplitudes(entry)
        denominator = math.prod((nominal[j] for j in positions), start=1 + 0j)
        total += table[(entry.l, entry.s, p_key)] / denominator
    return prefactor * total


def reconstruct_general(
    records: Iterable[CorrelationRecord], plan: InputPlan, target: SectorTarget, N: int
) -> Estimate:
    """First-order estimate from a general plan (all phases and signs).

    value = N^(n/2) e^{|alpha|^2} / (2^M M) sum_{l,s} F_n(l, s) / prod_j alpha_{k_j}^{l,s}

    Raises:
        ProtocolError: If the plan is not general, the target is invalid or records are missing
    """
    if plan.kind is not PlanKind.GENERAL:
        raise ProtocolError("reconstruct_general needs a general plan")
    prefactor = float(N) ** (target.n / 2.0) * math.exp(plan.power) / (2**plan.M * plan.M)
    value = _reconstruct(records, plan, target, N, prefactor)
    return Estimate(
        target=target,
        value=value,
        power=plan.power,
        N=N,
        first_order_bound=estimate_bound(plan, target, N),
        bound_kind=BoundKind.HEURISTIC,
        protocol=PlanKind.GENERAL,
    )


def reconstruct_elastic(
    records: Iterable[CorrelationRecord], plan: InputPlan, target: SectorTarget, N: int
) -> Estimate:
    """First-order estimate for number-conserving scatterers from an elastic plan.

    value = N^(m/2) e^{|alpha|^2} / 2^(M-1) sum_s F_m(s) / prod_j alpha_{k_j}^{s}

    Raises:
        ProtocolError: If the plan is not elastic, n != m, or records are missing
    """
    if plan.kind is not PlanKind.ELASTIC:
        raise ProtocolError("reconstruct_elastic needs an elastic plan")
    if target.n != target.m:
        raise ProtocolError(
            f"elastic reconstruction needs equal photon numbers, got n={target.n}, m={target.m}"
        )
    prefactor = float(N) ** (target.m / 2.0) * math.exp(plan.power) / 2 ** (plan.M - 1)
    value = _reconstruct(records, plan, target, N, prefactor)
    return Estimate(
        target=target,
        value=value,
        power=plan.power,
        N=N,
        first_order_bound=estimate_bound(plan, target, N),
        bound_kind=BoundKind.STRICT,
        protocol=PlanKind.ELASTIC,
    )


def reconstruct(records: Iterable[CorrelationRecord], plan: InputPlan, target: SectorTarget, N: int) -> Estimate:
    if plan.kind is PlanKind.GENERAL:
        return reconstruct_general(records, plan, target, N)
    return reconstruct_elastic(records, plan, target, N)


def sector_targets(records: Sequence[CorrelationRecord], plan: InputPlan, N: int) -> list[SectorTarget]:
    """Every element one record set can reconstruct, in a stable order."""
    p_lists = sorted({tuple(sorted(r.output_modes)) for r in records}, key=lambda p: (len(p), p))
    reference, others = plan.modes[0], plan.modes[1:]
    k_lists = [
        (reference, *rest) for size in range(plan.M) for rest in itertools.combinations(others, size)
    ]
    targets = []
    for p_modes in p_lists:
        if len(p_modes) > N:
            continue
        for k_modes in k_lists:
            if plan.kind is PlanKind.ELASTIC and len(k_modes) != len(p_modes):
                continue
            targets.append(SectorTarget(p_modes=p_modes, k_modes=k_modes))
    return targets


def reconstruct_all(
    records: Sequence[CorrelationRecord],
    plan: InputPlan,
    N: int,
    targets: Optional[Sequence[SectorTarget]] = None,
) -> list[Estimate]:
    """Reconstruct every requested sector from one record set."""
    targets = sector_targets(records, plan, N) if targets is None else targets
    return [reconstruct(records, plan, target, N) for target in targets]


def noise_study(
    oracle: TruncatedUnitary,
    plan: InputPlan,
    target: SectorTarget,
    output_modes: Sequence[int],
    N: int,
    shots_list: Sequence[int],
    detector_noise_std: float,
    repeats: int,
    seed: int = 0,
    threads: Optional[int] = None,
) -> NoiseStudyResult:
    """Repeat noisy campaigns to measure bias and the shot-noise scaling of an estimate.

    Args:
        oracle: Scatterer unitary
        plan: Input plan
        target: Element to reconstruct
        output_modes: Port assignment
        N: Port count
        shots_list: Shot counts to scan (at least two)
        detector_noise_std: Per-port detector noise scale
        repeats: Independent campaigns per shot count
        seed: Base seed; campaign r uses seed + r

    Returns:
        Per-shot-count bias and spread plus the fitted log-log slope of the spread
    """
    if len(shots_list) < 2 or repeats < 2:
        raise ProtocolError("noise study needs at least two shot counts and two repeats")
    exact_records = simulate_records(oracle, plan, output_modes, N, NoiseConfig(), threads)
    noiseless = reconstruct(exact_records, plan, target, N).value

    rows = []
    for shots in shots_list:
        values = np.array(
            [
                reconstruct(
                    simulate_records(
                        oracle,
                        plan,
                        output_modes,
                        N,
                        NoiseConfig(shots=shots, detector_noise_std=detector_noise_std, seed=seed + rep),
                        threads,
                    ),
                    plan,
                    target,
                    N,
                ).value
                for rep in range(repeats)
            ]
        )
        mean = complex(values.mean())
        spread = float(np.sqrt(np.sum(np.abs(values - mean) ** 2) / (repeats - 1)))
        standard_error = spread / math.sqrt(repeats)
        bias = abs(mean - noiseless)
        rows.append(
            NoiseStudyRow(
                shots=shots,
                mean_re=mean.real,
                mean_im=mean.imag,
                bias=bias,
                standard_error=standard_error,
                estimate_std=spread,
                unbiased=bias <= 3.0 * standard_error,
            )
        )

    slope = float(np.polyfit(np.log([r.shots for r in rows]), np.log([r.estimate_std for r in rows]), 1)[0])
    largest = max(rows, key=lambda r: r.shots)
    logger.info(f"Noise study: std slope {slope:.3f}, bias at {largest.shots} shots {largest.bias:.3e}")
    return NoiseStudyResult(
        target=target,
        noiseless_re=noiseless.real,
        noiseless_im=noiseless.imag,
        detector_noise_std=detector_noise_std,
        repeats=repeats,
        rows=tuple(rows),
        std_slope=slope,
        slope_ok=abs(slope + 0.5) <= 0.1,
        bias_ok=largest.unbiased,
    )


def build_oracle(mode_count: int, photon_cutoff: int, kind: UnitaryKind, seed: int) -> TruncatedUnitary:
    """Convenience wrapper used by the studies and the CLI."""
    spec = BasisSpec(mode_count=mode_count, photon_cutoff=photon_cutoff)
    return hilbert_service.random_unitary(spec, kind, seed)
