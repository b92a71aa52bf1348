"""`scattomo figure3 --panel {a,b,c,d}`: data behind the two-photon tomography panels."""

import logging
from pathlib import Path

import numpy as np

from scattomo.schemas.deconvolution_schemas import KernelConfig, TRegion
from scattomo.schemas.document_schemas import RunSummary, SurfaceDocument
from scattomo.schemas.experiment_schemas import Figure3Config, Panel, RunOptions
from scattomo.schemas.waveguide_schemas import GridAxis, SampledSurface, WavePacketSpec
from scattomo.services import deconvolution_service, extrapolation_service, io_service, waveguide_service

logger = logging.getLogger(__name__)

CROSS_SECTION_COLUMNS = ("sigma", "curve", "delta_k", "re", "im", "abs2")
RECOVERED_COLUMNS = ("khat", "delta_k", "delta_p", "re", "im", "abs2", "exact_abs2")
CROSS_SECTION_AGREEMENT = 0.01


def _khat(config: Figure3Config) -> float:
    return config.qubit.omega0 + config.khat_offset


def kernel_config(config: Figure3Config, sigma: float) -> KernelConfig:
    return KernelConfig(
        sigma=sigma, q_max=config.q_max, max_gain=config.max_gain, margin_sigmas=config.margin_sigmas
    )


def recovery_region(config: Figure3Config) -> TRegion:
    return TRegion(khat=(_khat(config),), delta_half_width=config.delta_half_width, step=config.deconvolution_step)


def bounds_panel(config: Figure3Config, out: Path) -> list[Path]:
    """Z-order error bounds against |alpha|^2 and Z."""
    panel = config.bounds
    rows = extrapolation_service.bound_grid(panel.M, panel.m, panel.powers, panel.factor, panel.Z_values)
    for power in panel.powers:
        best = extrapolation_service.optimal_order(panel.M, panel.m, power, panel.factor, max(panel.Z_values))
        logger.info(f"|alpha|^2={power:g}: optimal Z={best}")
    table = [(row.alpha2, row.Z, row.b, row.bound) for row in rows]
    return [io_service.write_csv(out / "figure3a_bounds.csv", ("alpha2", "Z", "b", "bound"), table)]


def surface_peak(surface: SampledSurface, scale: float) -> tuple[float, dict[str, float]]:
    abs2 = np.abs(np.asarray(surface.values) * scale) ** 2
    index = np.unravel_index(int(np.argmax(abs2)), abs2.shape)
    at = {axis.name: float(axis.values[i]) for axis, i in zip(surface.axes, index)}
    return float(abs2[index]), at


def surface_panel(config: Figure3Config, out: Path, threads: int | None) -> list[Path]:
    """Measured |gamma T|^2 over (delta_p, delta_k) at fixed khat."""
    khat_axis = GridAxis(name="khat", origin=_khat(config), step=1.0, count=1)
    delta_p = GridAxis.centered("delta_p", 0.0, config.delta_half_width, config.surface_step)
    delta_k = GridAxis.centered("delta_k", 0.0, config.delta_half_width, config.surface_step)
    surface = waveguide_service.t_surface(
        khat_axis, delta_p, delta_k, WavePacketSpec(sigma=config.sigma), config.qubit, config.quadrature, threads=threads
    )
    gamma = config.qubit.gamma
    peak, at = surface_peak(surface, gamma)
    csv_path = io_service.write_t_surface(out / "figure3b_surface.csv", surface, scale=gamma)
    header = SurfaceDocument(
        csv=csv_path.name,
        quantity="|gamma T|^2 (measured)",
        axes=surface.axes,
        meta=surface.meta,
        peak_abs2=peak,
        peak_at=at,
    )
    return [csv_path, io_service.write_json(out / "figure3b_surface.json", header)]


def cross_section_panel(config: Figure3Config, out: Path, threads: int | None) -> list[Path]:
    """Measured cross sections at fixed delta_p for two widths, and their deconvolutions."""
    khat = _khat(config)
    gamma = config.qubit.gamma
    khat_axis = GridAxis(name="khat", origin=khat, step=1.0, count=1)
    delta_p = GridAxis(name="delta_p", origin=config.cross_section_delta_p, step=1.0, count=1)
    delta_k = GridAxis.centered("delta_k", 0.0, config.delta_half_width, config.surface_step)

    rows = []
    recovered = {}
    series = []
    for sigma in config.cross_section_sigmas:
        spec = WavePacketSpec(sigma=sigma)
        measured = waveguide_service.t_surface(
            khat_axis, delta_p, delta_k, spec, config.qubit, config.quadrature, threads=threads
        )
        for dk, value in zip(delta_k.values, np.asarray(measured.values)[0, 0]):
            rows.append((sigma, "measured", float(dk), value.real * gamma, value.imag * gamma, abs(value * gamma) ** 2))

        report = deconvolution_service.recover_tmono(
            None, spec, config.qubit, recovery_region(config), kernel_config(config, sigma), config.quadrature
        )
        result = report.result
        row = result.axis("delta_p").index_of(config.cross_section_delta_p, atol=1e-6)
        line = np.asarray(result.values)[0, row] * gamma
        recovered[sigma] = line
        series.append(report.series)
        for dk, value in zip(result.axis("delta_k").values, line):
            rows.append((sigma, "deconvolved", float(dk), value.real, value.imag, abs(value) ** 2))
        logger.info(
            f"Cross section sigma={sigma:g}: order {report.series.order}, orders used {report.orders_used}, "
            f"noise gain {report.series.noise_gain:.2e}"
        )

    recovered_axis = result.axis("delta_k")
    nonlinearity = waveguide_service.qubit_nonlinearity(config.qubit)
    exact = deconvolution_service.exact_on_axes(
        nonlinearity, (GridAxis(name="khat", origin=khat, step=1.0, count=1), delta_p, recovered_axis)
    )[0, 0] * gamma
    for dk, value in zip(recovered_axis.values, exact):
        rows.append((0.0, "exact", float(dk), value.real, value.imag, abs(value) ** 2))

    first, second = (np.abs(recovered[s]) ** 2 for s in config.cross_section_sigmas)
    peak = float(np.max(np.abs(exact) ** 2))
    agreement = float(np.max(np.abs(first - second))) / peak
    exact_residual = max(float(np.max(np.abs(c - np.abs(exact) ** 2))) / peak for c in (first, second))
    logger.info(f"Deconvolved cross sections agree to {agreement:.2e} of the peak")

    summary = RunSummary(
        command="figure3c",
        files=("figure3c_cross_sections.csv",),
        metrics={"cross_section_agreement": agreement, "exact_residual": exact_residual, "peak_abs2": peak},
        checks={"cross_sections_agree": agreement <= CROSS_SECTION_AGREEMENT},
        series=tuple(series),
    )
    return [
        io_service.write_csv(out / "figure3c_cross_sections.csv", CROSS_SECTION_COLUMNS, rows),
        io_service.write_json(out / "figure3c_summary.json", summary),
    ]


def recovered_panel(config: Figure3Config, out: Path) -> list[Path]:
    """Recovered |gamma Tbar|^2 on the panel square next to the analytic surface."""
    check = deconvolution_service.convolution_forward_check(
        None,
        WavePacketSpec(sigma=config.sigma),
        kernel_config(config, config.sigma),
        config.qubit,
        recovery_region(config),
        config.quadrature,
    )
    gamma = config.qubit.gamma
    result = check.report.result
    exact = deconvolution_service.exact_on_axes(waveguide_service.qubit_nonlinearity(config.qubit), result.axes)
    exact_abs2 = np.transpose(np.abs(exact * gamma) ** 2, (0, 2, 1)).ravel()
    rows = [
        (k, dk, dp, re * gamma, im * gamma, abs2 * gamma * gamma, float(e))
        for (k, dk, dp, re, im, abs2), e in zip(io_service.t_surface_rows(result), exact_abs2)
    ]
    peak, at = surface_peak(result, gamma)
    header = SurfaceDocument(
        csv="figure3d_recovered.csv",
        quantity="|gamma Tbar|^2 (deconvolved)",
        axes=result.axes,
        meta=result.meta,
        peak_abs2=peak,
        peak_at=at,
        series=check.report.series,
    )
    logger.info(
        f"Recovered surface: order {check.report.series.order}, noise gain {check.report.series.noise_gain:.2e}, "
        f"|T|^2 residual {check.abs2_residual:.2e}"
    )
    summary = RunSummary(
        command="figure3d",
        files=("figure3d_recovered.csv", "figure3d_recovered.json"),
        metrics={
            "residual": check.residual,
            "abs2_residual": check.abs2_residual,
            "peak_abs2": check.peak_abs2,
        },
        checks={
            "within_target": check.within_target,
            "series_converged": check.report.converged,
            "full_coverage": not check.coverage_flag,
        },
        series=(check.report.series,),
    )
    return [
        io_service.write_csv(out / "figure3d_recovered.csv", RECOVERED_COLUMNS, rows),
        io_service.write_json(out / "figure3d_recovered.json", header),
        io_service.write_json(out / "figure3d_summary.json", summary),
    ]


def run_figure3(options: RunOptions) -> list[Path]:
    """Write the CSV data of one panel (all four when no panel is given)."""
    config = io_service.load_config(options.config, options.seed, Figure3Config)
    out = Path(options.out)
    panels = [options.panel] if options.panel else list(Panel)
    files = []
    for panel in panels:
        logger.info(f"Computing panel {panel.value}")
        if panel is Panel.A:
            files += bounds_panel(config, out)
        elif panel is Panel.B:
            files += surface_panel(config, out, options.threads)
        elif panel is Panel.C:
            files += cross_section_panel(config, out, options.threads)
        else:
            files += recovered_panel(config, out)
    return files
