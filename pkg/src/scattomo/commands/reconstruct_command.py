"""`scattomo reconstruct`: simulate (or load) correlation records and reconstruct S elements."""

import logging
from pathlib import Path
from typing import Optional

from scattomo.exceptions import ConfigValidationError
from scattomo.schemas.document_schemas import EstimateRow, ReconstructionDocument, RecordDocument, ZOrderRow
from scattomo.schemas.experiment_schemas import ReconstructConfig, RunOptions
from scattomo.schemas.extrapolation_schemas import PowerLadder
from scattomo.schemas.hilbert_schemas import TruncatedUnitary
from scattomo.schemas.protocol_schemas import Estimate, NoiseConfig, SectorTarget
from scattomo.services import extrapolation_service, hilbert_service, io_service, protocol_service

logger = logging.getLogger(__name__)


def oracle_cutoff(config: ReconstructConfig) -> int:
    """n_max for the simulated scatterer: explicit, or from the brightest input the run prepares."""
    if config.oracle.photon_cutoff is not None:
        return config.oracle.photon_cutoff
    power = sum(m * m for m in config.magnitudes) if config.magnitudes else config.power
    if config.extrapolation is not None:
        power *= config.extrapolation.factor ** (config.extrapolation.Z - 1)
    return hilbert_service.recommended_cutoff(power, m=len(config.input_modes))


def _z_order_row(
    config: ReconstructConfig, oracle: TruncatedUnitary, estimate: Estimate, threads: Optional[int]
) -> ZOrderRow:
    ladder = PowerLadder(
        base_power=estimate.power, factor=config.extrapolation.factor, Z=config.extrapolation.Z
    )
    result = extrapolation_service.estimate_ladder(
        oracle, config.protocol, config.input_modes, estimate.target, ladder, config.output_modes, config.ports, threads
    )
    return ZOrderRow(
        Z=ladder.Z,
        factor=ladder.factor,
        re=result.combined.real,
        im=result.combined.imag,
        error=result.error,
        bound=result.bound,
    )


def _row(estimate: Estimate, exact: Optional[complex], z_order: Optional[ZOrderRow]) -> EstimateRow:
    error = abs(estimate.value - exact) if exact is not None else None
    return EstimateRow(
        p_modes=estimate.target.p_modes,
        k_modes=estimate.target.k_modes,
        protocol=estimate.protocol,
        power=estimate.power,
        re=estimate.value.real,
        im=estimate.value.imag,
        exact_re=exact.real if exact is not None else None,
        exact_im=exact.imag if exact is not None else None,
        error=error,
        first_order_bound=estimate.first_order_bound,
        bound_kind=estimate.bound_kind,
        within_bound=error <= estimate.first_order_bound if error is not None else None,
        z_order=z_order,
    )


def run_reconstruct(options: RunOptions) -> list[Path]:
    """Run the first-order protocol end to end.

    Args:
        options: Command-line flags

    Returns:
        Paths of the written records and reconstruction documents

    Raises:
        ConfigValidationError: If the config or a records document is invalid
    """
    config = io_service.load_config(options.config, options.seed, ReconstructConfig)
    out = Path(options.out)
    targets = [SectorTarget(p_modes=t.p_modes, k_modes=t.k_modes) for t in config.targets] if config.targets else None
    files = []

    oracle = None
    if config.records_path:
        document = io_service.load_model(Path(config.records_path), RecordDocument)
        plan, records, ports = document.plan.to_plan(), document.to_records(), document.ports
        if config.extrapolation is not None:
            raise ConfigValidationError("extrapolation needs simulated records; drop records_path or extrapolation")
        logger.info(f"Loaded {len(records)} records from {config.records_path}")
    else:
        oracle = protocol_service.build_oracle(
            config.oracle.mode_count, oracle_cutoff(config), config.oracle.kind, config.seed
        )
        M = len(config.input_modes)
        magnitudes = config.magnitudes or protocol_service.equal_magnitudes(M, config.power)
        plan = protocol_service.build_input_plan(config.protocol, M, magnitudes, config.input_modes)
        noise = NoiseConfig(
            shots=config.noise.shots, detector_noise_std=config.noise.detector_noise_std, seed=config.seed
        )
        ports = config.ports
        records = protocol_service.simulate_records(oracle, plan, config.output_modes, ports, noise, options.threads)
        files.append(io_service.write_json(out / "records.json", RecordDocument.build(plan, ports, records)))

    rows = []
    for estimate in protocol_service.reconstruct_all(records, plan, ports, targets):
        exact = None
        z_order = None
        if oracle is not None:
            exact = hilbert_service.exact_s_element(oracle, estimate.target.p_modes, estimate.target.k_modes)
            if config.extrapolation is not None:
                z_order = _z_order_row(config, oracle, estimate, options.threads)
        rows.append(_row(estimate, exact, z_order))

    checked = [row.within_bound for row in rows if row.within_bound is not None]
    document = ReconstructionDocument(
        seed=config.seed,
        ports=ports,
        noise_shots=None if config.records_path else config.noise.shots,
        estimates=tuple(rows),
        all_within_bound=all(checked),
    )
    if checked and not document.all_within_bound:
        logger.warning("Some reconstruction errors exceed their first-order bound")
    logger.info(f"Reconstructed {len(rows)} elements")
    files.append(io_service.write_json(out / "reconstruction.json", document))
    return files
