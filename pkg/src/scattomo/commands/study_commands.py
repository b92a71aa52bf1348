"""Scaling, noise and imperfection studies, plus the JSON-schema export."""

import json
import logging
from pathlib import Path

from pydantic import BaseModel

from scattomo.schemas import document_schemas, experiment_schemas
from scattomo.schemas.document_schemas import ImperfectionsDocument, NoiseDemoDocument, ScalingDocument
from scattomo.schemas.experiment_schemas import ImperfectionsConfig, NoiseDemoConfig, RunOptions, ScalingConfig
from scattomo.schemas.hilbert_schemas import UnitaryKind
from scattomo.schemas.protocol_schemas import SectorTarget
from scattomo.schemas.waveguide_schemas import GridAxis
from scattomo.services import hilbert_service, imperfection_service, io_service, protocol_service, waveguide_service

logger = logging.getLogger(__name__)

SCHEMA_MODELS: tuple[type[BaseModel], ...] = (
    experiment_schemas.ReconstructConfig,
    experiment_schemas.Figure3Config,
    experiment_schemas.DeconvolveConfig,
    experiment_schemas.ScalingConfig,
    experiment_schemas.NoiseDemoConfig,
    experiment_schemas.ImperfectionsConfig,
    document_schemas.RecordDocument,
    document_schemas.ReconstructionDocument,
    document_schemas.SurfaceDocument,
    document_schemas.RunSummary,
    document_schemas.ScalingDocument,
    document_schemas.NoiseDemoDocument,
    document_schemas.ImperfectionsDocument,
)


def run_scaling(options: RunOptions) -> list[Path]:
    """Fit the sigma exponents of the nonlinear term and of the single-photon limit."""
    config = io_service.load_config(options.config, options.seed, ScalingConfig)
    out = Path(options.out)
    delta_axis = GridAxis.centered("delta", 0.0, config.delta_half_width, config.delta_step)
    nonlinear = waveguide_service.sigma_scaling_study(
        config.sigmas, delta_axis, config.qubit.omega0 + config.khat_offset, config.qubit, config.quadrature
    )
    single = waveguide_service.single_photon_limit_study(
        config.single_photon_sigmas, config.qubit.omega0 + config.single_photon_offset, config.qubit, config.quadrature
    )
    rows = [
        (fit.quantity, sigma, value, fit.exponent, fit.expected, fit.within_tolerance)
        for fit in (nonlinear, single)
        for sigma, value in zip(fit.parameters, fit.values)
    ]
    return [
        io_service.write_csv(
            out / "scaling.csv", ("quantity", "sigma", "value", "exponent", "expected", "within_tolerance"), rows
        ),
        io_service.write_json(
            out / "scaling.json", ScalingDocument(seed=config.seed, nonlinear=nonlinear, single_photon=single)
        ),
    ]


def run_noise_demo(options: RunOptions) -> list[Path]:
    """Bias and shot-noise scaling of one element under detector noise."""
    config = io_service.load_config(options.config, options.seed, NoiseDemoConfig)
    out = Path(options.out)
    target = SectorTarget(p_modes=config.target.p_modes, k_modes=config.target.k_modes)
    cutoff = config.oracle.photon_cutoff or hilbert_service.recommended_cutoff(config.power, m=target.m)
    oracle = protocol_service.build_oracle(config.oracle.mode_count, cutoff, config.oracle.kind, config.seed)
    plan = protocol_service.build_input_plan(
        config.protocol, target.m, protocol_service.equal_magnitudes(target.m, config.power), target.k_modes
    )
    result = protocol_service.noise_study(
        oracle,
        plan,
        target,
        target.p_modes,
        config.ports,
        config.shots,
        config.detector_noise_std,
        config.repeats,
        seed=config.seed,
        threads=options.threads,
    )
    header = ("shots", "mean_re", "mean_im", "bias", "standard_error", "estimate_std", "unbiased")
    rows = [
        (r.shots, r.mean_re, r.mean_im, r.bias, r.standard_error, r.estimate_std, r.unbiased) for r in result.rows
    ]
    return [
        io_service.write_csv(out / "noise_demo.csv", header, rows),
        io_service.write_json(out / "noise_demo.json", NoiseDemoDocument(seed=config.seed, result=result)),
    ]


def run_imperfections(options: RunOptions) -> list[Path]:
    """Excess error against sign, power and phase perturbations."""
    config = io_service.load_config(options.config, options.seed, ImperfectionsConfig)
    out = Path(options.out)
    target = SectorTarget(p_modes=config.target.p_modes, k_modes=config.target.k_modes)
    brightest = max(config.base_power + max(config.deltas), *config.phase_powers)
    cutoff = hilbert_service.recommended_cutoff(brightest, m=target.m)
    elastic = protocol_service.build_oracle(config.mode_count, cutoff, UnitaryKind.ELASTIC, config.seed)
    general = protocol_service.build_oracle(config.mode_count, cutoff, UnitaryKind.GENERAL, config.seed + 1)
    result = imperfection_service.imperfection_suite(
        elastic,
        general,
        target,
        target.p_modes,
        config.ports,
        config.base_power,
        config.deltas,
        config.seeds,
        config.phase_powers,
        config.phase_delta,
        threads=options.threads,
    )
    rows = [
        (study.kind.value, row.delta, row.base_power, row.excess_error, study.fitted_exponent)
        for study in result.studies
        for row in study.rows
    ]
    return [
        io_service.write_csv(
            out / "imperfections.csv", ("kind", "delta", "base_power", "excess_error", "fitted_exponent"), rows
        ),
        io_service.write_json(out / "imperfections.json", ImperfectionsDocument(seed=config.seed, result=result)),
    ]


def run_schema(options: RunOptions) -> list[Path]:
    """Write the JSON schema of every config and output document."""
    out = Path(options.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for model in SCHEMA_MODELS:
        path = out / f"{model.__name__}.schema.json"
        path.write_text(json.dumps(model.model_json_schema(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        files.append(path)
    logger.info(f"Wrote {len(files)} schemas to {out}")
    return files
