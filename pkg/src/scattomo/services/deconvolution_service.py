"""Inverse Gaussian kernel applied as a term-wise Hermite series.

Every term (-1)^q / (2^q q!) G_sigma(u) H_2q(u / sigma) is applied to the data
separately and the partial sums are monitored; the pointwise kernel series
itself does not converge.

The spectral method applies term q as the Fourier multiplier exp(-z/2) z^q / q!,
z = (sigma xi)^2 / 2, on a zero-padded FFT grid. It replaces a per-term
Gauss-Legendre rule on the sample support. The direct method integrates
`kernel_term` against the samples with trapezoid weights and is kept as a
cross-check of the spectral operators.

The truncation order is fixed from the grid before any data are read: the
highest order up to q_max whose partial sum amplifies no Fourier component by
more than max_gain. The three-axis series is truncated by total order, so its
partial sum is the one-axis multiplier evaluated at the summed z and the
rounding noise of the input is amplified once rather than once per axis.
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy import fft
from scipy.special import gammaln

from scattomo.exceptions import DeconvolutionError, ScatTomoError
from scattomo.schemas.deconvolution_schemas import (
    DeconvolutionMethod,
    DeconvolutionReport,
    ForwardCheckReport,
    KernelConfig,
    SeriesPass,
    TRegion,
)
from scattomo.schemas.waveguide_schemas import GridAxis, QuadratureConfig, QubitParams, SampledSurface, WavePacketSpec
from scattomo.services import waveguide_service
from scattomo.services.waveguide_service import Nonlinearity

logger = logging.getLogger(__name__)

MAX_HERMITE_ORDER = 200
EDGE_RATIO = 1e-3
WIDTH_GUARD = 0.95
COVERAGE_FLAG_SIGMAS = 4.0
GAIN_SAMPLES = 4097
STALL_RUN = 3
SLICE_BLOCK = 16
T_AXES = ("khat", "delta_p", "delta_k")


def hermite(n: int, x):
    """Physicists' Hermite polynomial H_n by the three-term recurrence.

    Raises:
        DeconvolutionError: If n is outside 0..200 or the value overflows
    """
    if not 0 <= n <= MAX_HERMITE_ORDER:
        raise DeconvolutionError(f"Hermite order must lie in 0..{MAX_HERMITE_ORDER}, got {n}")
    x = np.asarray(x, dtype=float)
    previous, current = np.ones_like(x), 2.0 * x
    if n == 0:
        result = previous
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(1, n):
                previous, current = current, 2.0 * x * current - 2.0 * k * previous
        result = current
    if not np.all(np.isfinite(result)):
        raise DeconvolutionError(f"H_{n} overflows for |x| up to {float(np.max(np.abs(x))):g}")
    return float(result) if result.ndim == 0 else result


def kernel_term(q: int, u, sigma: float):
    """Single series term (-1)^q / (2^q q!) G_sigma(u) H_2q(u / sigma).

    Evaluated through normalised Hermite functions so large orders do not overflow.
    """
    if q < 0 or 2 * q > MAX_HERMITE_ORDER:
        raise DeconvolutionError(f"kernel order q must lie in 0..{MAX_HERMITE_ORDER // 2}, got {q}")
    x = np.asarray(u, dtype=float) / sigma
    psi_prev = np.zeros_like(x)
    psi = np.exp(-0.5 * x * x) / math.pi**0.25
    for n in range(2 * q):
        psi_prev, psi = psi, math.sqrt(2.0 / (n + 1)) * x * psi - math.sqrt(n / (n + 1)) * psi_prev
    scale = math.exp(0.5 * gammaln(2 * q + 1.0) + 0.25 * math.log(math.pi) - gammaln(q + 1.0))
    value = (-1) ** q * scale * np.exp(-0.5 * x * x) * psi / math.sqrt(math.pi * sigma * sigma)
    return float(value) if value.ndim == 0 else value



def nyquist_z(sigma: float, step: float) -> float:
    """Largest z = (sigma xi)^2 / 2 a grid of spacing `step` resolves."""
    return 0.5 * (sigma * math.pi / step) ** 2


def series_order(z_max: float, cfg: KernelConfig) -> tuple[int, float]:
    """Truncation order and its noise gain for multipliers sampled up to z_max.

    The gain of order Q is the peak over 0 <= z <= z_max of the partial sum
    sum_{q <= Q} exp(-z/2) z^q / q!, which grows with Q. The order is the
    highest one up to cfg.q_max whose gain stays within cfg.max_gain.
    """
    z = np.linspace(0.0, z_max, GAIN_SAMPLES)
    term = np.exp(-0.5 * z)
    total = term.copy()
    order, gain = 0, float(total.max())
    for q in range(1, cfg.q_max + 1):
        term = term * z / q
        candidate = float(np.max(total + term))
        if candidate > cfg.max_gain:
            logger.info(
                f"Series truncated at order {order} below q_max={cfg.q_max}: order {q} amplifies by "
                f"{candidate:.2e} > max_gain={cfg.max_gain:.1e}"
            )
            break
        total += term
        order, gain = q, candidate
    return order, gain


def _spectral_operators(axis: GridAxis, rows: np.ndarray, sigma: float, order: int) -> np.ndarray:
    n = axis.count
    size = fft.next_fast_len(2 * n)
    z = 0.5 * (sigma * 2.0 * np.pi * fft.fftfreq(size, d=axis.step)) ** 2
    offsets = (rows[:, None] - np.arange(n)[None, :]) % size
    operators = np.empty((order + 1, rows.size, n))
    with np.errstate(divide="ignore"):
        log_z = np.log(z)
    for q in range(order + 1):
        if q == 0:
            multiplier = np.exp(-0.5 * z)
        else:
            multiplier = np.where(z > 0, np.exp(-0.5 * z + q * log_z - gammaln(q + 1.0)), 0.0)
        operators[q] = fft.ifft(multiplier).real[offsets]
    return operators


def _direct_operators(axis: GridAxis, rows: np.ndarray, sigma: float, order: int) -> np.ndarray:
    x = axis.values
    weights = np.full(axis.count, axis.step)
    weights[[0, -1]] *= 0.5
    separation = x[rows][:, None] - x[None, :]
    return np.stack([kernel_term(q, separation, sigma) * weights[None, :] for q in range(order + 1)])


def term_operators(
    axis: GridAxis, rows: np.ndarray, sigma: float, cfg: KernelConfig, order: Optional[int] = None
) -> np.ndarray:
    """Matrices R_q, q = 0..order (cfg.q_max by default), mapping samples on `axis` to term q at the output rows."""
    order = cfg.q_max if order is None else order
    if cfg.method is DeconvolutionMethod.SPECTRAL:
        return _spectral_operators(axis, rows, sigma, order)
    return _direct_operators(axis, rows, sigma, order)


def _evaluation_rows(
    axis: GridAxis, sigma: float, cfg: KernelConfig, bounds: Optional[tuple[float, float]], require_coverage: bool
) -> tuple[np.ndarray, bool]:
    x = axis.values
    reach = cfg.coverage_sigmas * sigma
    if bounds is None:
        rows = np.flatnonzero((x - axis.origin >= reach - 1e-9) & (axis.end - x >= reach - 1e-9))
        if rows.size == 0:
            raise DeconvolutionError(
                f"axis {axis.name} spans [{axis.origin:g}, {axis.end:g}]; no point has {reach:g} of grid on both sides"
            )
    else:
        lo, hi = bounds
        rows = np.flatnonzero((x >= lo - 1e-9) & (x <= hi + 1e-9))
        if rows.size == 0:
            raise DeconvolutionError(f"no grid point of axis {axis.name} lies in [{lo:g}, {hi:g}]")
        if require_coverage and (x[rows[0]] - axis.origin < reach - 1e-9 or axis.end - x[rows[-1]] < reach - 1e-9):
            raise DeconvolutionError(
                f"axis {axis.name} spans [{axis.origin:g}, {axis.end:g}] but evaluating [{x[rows[0]]:g}, "
                f"{x[rows[-1]]:g}] needs [{x[rows[0]] - reach:g}, {x[rows[-1]] + reach:g}] "
                f"({cfg.coverage_sigmas:g} sigma = {reach:g} on each side)"
            )
    margin = min(x[rows[0]] - axis.origin, axis.end - x[rows[-1]])
    return rows, margin < COVERAGE_FLAG_SIGMAS * sigma


def _output_axis(axis: GridAxis, rows: np.ndarray) -> GridAxis:
    return GridAxis(name=axis.name, origin=float(axis.values[rows[0]]), step=axis.step, count=int(rows.size))


def _envelope(data: np.ndarray, position: int, subtract_baseline: bool) -> np.ndarray:
    work = np.moveaxis(np.asarray(data), position, 0)
    if subtract_baseline:
        work = work - 0.5 * (work[0] + work[-1])
    return np.abs(work).reshape(work.shape[0], -1).max(axis=1)


def _input_warnings(envelope: np.ndarray, axis: GridAxis, sigma: float) -> list[str]:
    warnings = []
    peak = float(envelope.max())
    if peak == 0:
        return warnings
    edge = float(max(envelope[0], envelope[-1]))
    if edge > EDGE_RATIO * peak:
        warnings.append(
            f"axis {axis.name}: input does not decay toward the grid edges (edge/peak = {edge / peak:.2e})"
        )
    x = axis.values
    mean = float(np.sum(envelope * x) / np.sum(envelope))
    width = math.sqrt(2.0 * float(np.sum(envelope * (x - mean) ** 2) / np.sum(envelope)))
    if width < WIDTH_GUARD * math.sqrt(2.0) * sigma:
        warnings.append(
            f"axis {axis.name}: feature width {width:.3g} is narrower than sqrt(2) sigma = {math.sqrt(2.0) * sigma:.3g}; "
            f"the inverse kernel amplifies it strongly"
        )
    for message in warnings:
        logger.warning(message)
    return warnings


def _matmul_axis(operator: np.ndarray, data: np.ndarray, axis: int) -> np.ndarray:
    def apply(part: np.ndarray) -> np.ndarray:
        return np.moveaxis(np.tensordot(part, operator, axes=([axis], [1])), -1, axis)

    if np.iscomplexobj(data):
        return apply(data.real) + 1j * apply(data.imag)
    return apply(data)


def _apply_axis(terms: np.ndarray, position: int, operators: np.ndarray, subtract_baseline: bool) -> np.ndarray:
    """Deconvolve one more axis of term-resolved data, collecting terms by total order.

    terms[m] is the contribution of total order m so far and `position` the
    axis inside it; operators[b] is R_b for b = 0..top. Returns
    out[m] = sum_b R_b terms[m - b] for m = 0..top.
    """
    top = operators.shape[0] - 1
    axis = position + 1
    count = min(terms.shape[0], top + 1)
    terms = terms[:count]
    baseline = None
    if subtract_baseline:
        baseline = 0.5 * (np.take(terms, [0], axis=axis) + np.take(terms, [-1], axis=axis))
        terms = terms - baseline
    shape = list(terms.shape)
    shape[0], shape[axis] = top + 1, operators.shape[1]
    out = np.zeros(shape, dtype=np.result_type(terms, operators))
    for b in range(top + 1):
        used = min(count, top + 1 - b)
        out[b : b + used] += _matmul_axis(operators[b], terms[:used], axis)
    if baseline is not None:
        # constants pass through order 0 unchanged
        out[:count] += baseline
    return out


def _stalls(increments: list[float], cfg: KernelConfig) -> bool:
    q = len(increments)
    if q <= max(cfg.stall_order, STALL_RUN):
        return False
    latest = increments[-1]
    rising = all(increments[-i] > increments[-i - 1] for i in range(1, STALL_RUN + 1))
    return rising and latest > cfg.series_tol and latest > cfg.stall_factor * min(increments[:-1])


def _sum_orders(terms: np.ndarray, cfg: KernelConfig) -> tuple[np.ndarray, int, list[float], bool]:
    partial = terms[0].copy()
    increments: list[float] = []
    result, orders_used = None, terms.shape[0] - 1
    for q in range(1, terms.shape[0]):
        previous = partial
        partial = partial + terms[q]
        size = float(np.max(np.abs(partial))) if partial.size else 0.0
        increments.append(float(np.max(np.abs(terms[q]))) / size if size > 0 else 0.0)
        if result is None and _stalls(increments, cfg):
            result, orders_used = previous, q - 1
            logger.warning(
                f"Series stalled at order {q} (increment {increments[-1]:.2e}); keeping orders up to {q - 1}"
            )
    stalled = result is not None
    return (partial if result is None else result), orders_used, increments, stalled


def _finish(
    terms: np.ndarray, axes: Sequence[GridAxis], sigmas: Sequence[float], gain: float, cfg: KernelConfig
) -> tuple[np.ndarray, SeriesPass]:
    order = terms.shape[0] - 1
    summed, orders_used, increments, stalled = _sum_orders(terms, cfg)
    converged = not stalled and orders_used > 0 and increments[orders_used - 1] < cfg.series_tol
    names = tuple(axis.name for axis in axes)
    if not converged and not stalled and order > 0:
        logger.info(
            f"{'/'.join(names)}: last increment {increments[-1]:.2e} at order {order} is above {cfg.series_tol:g}"
        )
    return summed, SeriesPass(
        axes=names,
        sigmas=tuple(sigmas),
        order=order,
        orders_used=orders_used,
        increments=tuple(increments),
        noise_gain=gain,
        converged=converged,
        stalled=stalled,
    )


def deconvolve_1d(
    samples: SampledSurface,
    cfg: KernelConfig,
    bounds: Optional[tuple[float, float]] = None,
    require_coverage: bool = True,
) -> DeconvolutionReport:
    """Undo a G_sigma blur of a function sampled on one uniform axis.

    Args:
        samples: One-axis surface, e.g. measured S_kk
        cfg: Kernel width and series controls
        bounds: Output interval; defaults to every point with full coverage
        require_coverage: Raise when the grid misses coverage_sigmas * sigma around an output point

    Returns:
        Report with the deconvolved samples on the output interval

    Raises:
        DeconvolutionError: On insufficient coverage or a multi-axis input
    """
    if len(samples.axes) != 1:
        raise DeconvolutionError(f"deconvolve_1d needs one axis, got {samples.axis_names}")
    axis = samples.axes[0]
    data = np.asarray(samples.values)
    rows, flag = _evaluation_rows(axis, cfg.sigma, cfg, bounds, require_coverage)
    warnings = _input_warnings(_envelope(data, 0, cfg.subtract_baseline), axis, cfg.sigma)
    order, gain = series_order(nyquist_z(cfg.sigma, axis.step), cfg)
    operators = term_operators(axis, rows, cfg.sigma, cfg, order)
    terms = _apply_axis(data[None], 0, operators, cfg.subtract_baseline)
    values, series = _finish(terms, (axis,), (cfg.sigma,), gain, cfg)
    return DeconvolutionReport(
        result=SampledSurface(
            axes=(_output_axis(axis, rows),), values=values, meta={**samples.meta, "sigma": cfg.sigma}
        ),
        series=series,
        warnings=tuple(warnings),
        coverage_flag=flag,
    )


def _t_sigmas(sigma: float) -> dict[str, tuple[float, float]]:
    # khat enters the kernel as sqrt(2) (khat' - khat): K_sigma(sqrt(2) u) = K_{sigma/sqrt(2)}(u) / sqrt(2)
    return {"khat": (sigma / math.sqrt(2.0), 1.0 / math.sqrt(2.0)), "delta_p": (sigma, 1.0), "delta_k": (sigma, 1.0)}


def _t_plan(
    axes: Sequence[GridAxis],
    cfg: KernelConfig,
    bounds: dict[str, tuple[float, float]],
    require_coverage: bool,
) -> tuple[list[np.ndarray], bool, int, float]:
    """Output rows per T axis, the coverage flag and the joint truncation order with its gain."""
    sigmas = _t_sigmas(cfg.sigma)
    rows, flagged, z_max = [], False, 0.0
    for axis in axes:
        sigma = sigmas[axis.name][0]
        axis_rows, flag = _evaluation_rows(axis, sigma, cfg, bounds.get(axis.name), require_coverage)
        rows.append(axis_rows)
        flagged = flagged or flag
        z_max += nyquist_z(sigma, axis.step)
    order, gain = series_order(z_max, cfg)
    return rows, flagged, order, gain


def _finish_t(
    terms: np.ndarray,
    axes: Sequence[GridAxis],
    rows: Sequence[np.ndarray],
    gain: float,
    cfg: KernelConfig,
    meta: dict[str, float],
    warnings: list[str],
    flagged: bool,
) -> DeconvolutionReport:
    sigmas = _t_sigmas(cfg.sigma)
    summed, series = _finish(terms, axes, [sigmas[axis.name][0] for axis in axes], gain, cfg)
    return DeconvolutionReport(
        result=SampledSurface(
            axes=tuple(_output_axis(axis, r) for axis, r in zip(axes, rows)),
            values=summed / (math.sqrt(math.pi) * cfg.sigma),
            meta={**meta, "sigma": cfg.sigma},
        ),
        series=series,
        warnings=tuple(warnings),
        coverage_flag=flagged,
    )


def deconvolve_t_3d(
    surface: SampledSurface,
    cfg: KernelConfig,
    region: Optional[dict[str, tuple[float, float]]] = None,
    require_coverage: bool = True,
) -> DeconvolutionReport:
    """Recover Tbar from a measured T surface over (khat, delta_p, delta_k).

    Applies the inverse kernel axis by axis (khat, then delta_p, then delta_k),
    keeping the terms apart by total order, then the overall 1 / (sqrt(pi) sigma)
    prefactor. The result is indexed (khat, delta_p, delta_k) whatever the input order.

    Args:
        surface: Measured T on a grid covering every output point
        cfg: Kernel width and series controls; q_max bounds the total order
        region: Output interval per axis name; every covered point when missing
        require_coverage: Raise when an output point lacks coverage_sigmas of grid

    Raises:
        DeconvolutionError: On missing axes or insufficient grid coverage
    """
    if set(surface.axis_names) != set(T_AXES):
        raise DeconvolutionError(f"T surface needs axes {T_AXES}, got {surface.axis_names}")
    positions = [surface.axis_names.index(name) for name in T_AXES]
    data = np.moveaxis(np.asarray(surface.values), positions, (0, 1, 2))
    axes = [surface.axes[p] for p in positions]
    rows, flagged, order, gain = _t_plan(axes, cfg, region or {}, require_coverage)
    sigmas = _t_sigmas(cfg.sigma)
    try:
        warnings = []
        for position, axis in enumerate(axes):
            envelope = _envelope(data, position, cfg.subtract_baseline)
            warnings.extend(_input_warnings(envelope, axis, sigmas[axis.name][0]))
        terms = data[None]
        for position, axis in enumerate(axes):
            sigma, factor = sigmas[axis.name]
            operators = term_operators(axis, rows[position], sigma, cfg, order)
            terms = factor * _apply_axis(terms, position, operators, cfg.subtract_baseline)
    except ScatTomoError:
        raise
    except Exception as e:
        logger.error(f"Error deconvolving T surface: {e}", exc_info=True)
        raise
    return _finish_t(terms, axes, rows, gain, cfg, dict(surface.meta), warnings, flagged)


def measurement_axes(region: TRegion, sigma: float, cfg: KernelConfig) -> tuple[GridAxis, GridAxis, GridAxis]:
    """Grid of the measured T needed to recover Tbar on `region` with cfg.margin_sigmas of margin."""
    step = region.step
    khat_margin = cfg.margin_sigmas * sigma / math.sqrt(2.0)
    lo, hi = min(region.khat), max(region.khat)
    pad = int(math.ceil(khat_margin / step - 1e-9))
    inner = int(math.ceil((hi - lo) / step - 1e-9))
    khat_axis = GridAxis(name="khat", origin=lo - pad * step, step=step, count=inner + 2 * pad + 1)
    half = region.delta_half_width + cfg.margin_sigmas * sigma
    return (
        khat_axis,
        GridAxis.centered("delta_p", 0.0, half, step),
        GridAxis.centered("delta_k", 0.0, half, step),
    )


def recover_tmono(
    nonlinearity: Optional[Nonlinearity],
    spec: WavePacketSpec,
    params: QubitParams,
    region: TRegion,
    cfg: KernelConfig,
    quad: Optional[QuadratureConfig] = None,
    require_coverage: bool = True,
) -> DeconvolutionReport:
    """Simulate the measured T around `region` and deconvolve it back to Tbar.

    The khat pass is accumulated slice by slice while the measured surface is
    generated, so the full three-dimensional measurement is never stored.

    Args:
        nonlinearity: Tbar to blur; the two-level emitter of `params` when None
        spec: Packet width (must equal cfg.sigma)
        params: Emitter parameters
        region: Output khat interval and relative-momentum square
        cfg: Kernel and series controls
        quad: Quadrature used to generate the measured T
        require_coverage: Raise when the margin is below coverage_sigmas

    Raises:
        DeconvolutionError: On a sigma mismatch or insufficient coverage
    """
    if not math.isclose(spec.sigma, cfg.sigma, rel_tol=1e-12):
        raise DeconvolutionError(f"packet width {spec.sigma} differs from kernel width {cfg.sigma}")
    axes = measurement_axes(region, cfg.sigma, cfg)
    khat_axis, delta_p_axis, delta_k_axis = axes
    half = region.delta_half_width
    bounds = {"khat": (min(region.khat), max(region.khat)), "delta_p": (-half, half), "delta_k": (-half, half)}
    rows, flagged, order, gain = _t_plan(axes, cfg, bounds, require_coverage)
    sigmas = _t_sigmas(cfg.sigma)
    khat_sigma, khat_factor = sigmas["khat"]
    operators = term_operators(khat_axis, rows[0], khat_sigma, cfg, order)

    try:
        accumulated = np.zeros((order + 1, rows[0].size, delta_p_axis.count, delta_k_axis.count), np.complex128)
        envelopes = [np.zeros(axis.count) for axis in axes]
        first = last = None
        block: list[np.ndarray] = []
        slices = waveguide_service.t_surface_slices(
            khat_axis, delta_p_axis, delta_k_axis, spec, params, quad, nonlinearity
        )
        for j, values in enumerate(slices):
            block.append(values)
            if len(block) == SLICE_BLOCK or j == khat_axis.count - 1:
                start = j + 1 - len(block)
                accumulated += np.tensordot(operators[:, :, start : j + 1], np.stack(block), axes=([2], [0]))
                block = []
            envelopes[0][j] = float(np.max(np.abs(values)))
            for position in (1, 2):
                np.maximum(
                    envelopes[position], _envelope(values, position - 1, cfg.subtract_baseline), out=envelopes[position]
                )
            if j == 0:
                first = values
            last = values
        logger.info(f"Streamed {khat_axis.count} measured T slices of shape {last.shape}; series order {order}")

        if cfg.subtract_baseline:
            baseline = 0.5 * (first + last)
            accumulated -= operators.sum(axis=2)[:, :, None, None] * baseline[None, None]
            accumulated[0] += baseline
            envelopes[0][0] = float(np.max(np.abs(first - baseline)))
            envelopes[0][-1] = float(np.max(np.abs(last - baseline)))
        warnings = []
        for axis, envelope in zip(axes, envelopes):
            warnings.extend(_input_warnings(envelope, axis, sigmas[axis.name][0]))
        accumulated *= khat_factor
        terms = accumulated
        for position in (1, 2):
            axis = axes[position]
            sigma, factor = sigmas[axis.name]
            terms = factor * _apply_axis(
                terms, position, term_operators(axis, rows[position], sigma, cfg, order), cfg.subtract_baseline
            )
    except ScatTomoError:
        raise
    except Exception as e:
        logger.error(f"Error recovering Tbar: {e}", exc_info=True)
        raise

    flagged = flagged or cfg.margin_sigmas < COVERAGE_FLAG_SIGMAS
    meta = {"gamma": params.gamma, "omega0": params.omega0}
    return _finish_t(terms, axes, rows, gain, cfg, meta, warnings, flagged)


def exact_on_axes(nonlinearity: Nonlinearity, axes: Sequence[GridAxis]) -> np.ndarray:
    """Tbar on (khat, delta_p, delta_k) axes."""
    K, P, D = np.meshgrid(*(axis.values for axis in axes), indexing="ij")
    return np.asarray(nonlinearity(K - P, K + P, K - D, K + D))



def convolution_forward_check(
    nonlinearity: Optional[Nonlinearity],
    spec: WavePacketSpec,
    cfg: KernelConfig,
    params: QubitParams,
    region: TRegion,
    quad: Optional[QuadratureConfig] = None,
    target: float = 0.02,
) -> ForwardCheckReport:
    """Blur a known Tbar, deconvolve it and report the relative roundtrip error."""
    nonlinearity = nonlinearity or waveguide_service.qubit_nonlinearity(params)
    report = recover_tmono(nonlinearity, spec, params, region, cfg, quad, require_coverage=False)
    recovered = np.asarray(report.result.values)
    exact = exact_on_axes(nonlinearity, report.result.axes)
    scale = float(np.max(np.abs(exact)))
    gamma2 = params.gamma**2
    abs2_exact = gamma2 * np.abs(exact) ** 2
    peak = float(np.max(abs2_exact))
    residual = float(np.max(np.abs(recovered - exact))) / scale
    abs2_residual = float(np.max(np.abs(gamma2 * np.abs(recovered) ** 2 - abs2_exact))) / peak
    logger.info(
        f"Forward check sigma={spec.sigma:g}, order {report.series.order}: residual {residual:.3e}, "
        f"|T|^2 residual {abs2_residual:.3e}"
    )
    return ForwardCheckReport(
        sigma=spec.sigma,
        q_max=cfg.q_max,
        residual=residual,
        abs2_residual=abs2_residual,
        peak_abs2=peak,
        orders_used=report.orders_used,
        coverage_flag=report.coverage_flag,
        target=target,
        within_target=abs2_residual <= target,
        report=report,
    )
