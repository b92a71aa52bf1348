"""Two-level emitter in a one-dimensional channel and its Gaussian wave-packet measurements.

Frequencies and momenta share units (c = 1); by default everything is in units
of the decay rate gamma.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from scattomo.config import settings
from scattomo.exceptions import ScatTomoError, WaveguideError
from scattomo.schemas.waveguide_schemas import (
    GridAxis,
    QuadratureConfig,
    QubitParams,
    SampledSurface,
    ScalingFit,
    TCoordinates,
    WavePacketSpec,
)

logger = logging.getLogger(__name__)

# Forward scattering needs packet centres well away from k = 0
FORWARD_SCATTERING_SIGMAS = 10.0

Nonlinearity = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def reflection(omega, params: QubitParams):
    """r = -1 / (1 - i (omega - omega0) / gamma); accepts scalars or arrays."""
    return -1.0 / (1.0 - 1j * (np.asarray(omega) - params.omega0) / params.gamma)


def transmission(omega, params: QubitParams):
    return 1.0 + reflection(omega, params)


def tmono(omega1, omega2, nu1, nu2, params: QubitParams):
    """Monochromatic two-photon nonlinearity -(i / pi gamma) r(w1) r(w2) (r(v1) + r(v2)).

    omega1, omega2 are the outgoing and nu1, nu2 the incoming frequencies.
    """
    outgoing = reflection(omega1, params) * reflection(omega2, params)
    incoming = reflection(nu1, params) + reflection(nu2, params)
    return -1j / (np.pi * params.gamma) * outgoing * incoming


def gaussian_profile(k, sigma: float):
    """G_sigma(k) = (pi sigma^2)^(-1/2) exp(-(k / sigma)^2)."""
    k = np.asarray(k, dtype=float)
    return np.exp(-((k / sigma) ** 2)) / math.sqrt(math.pi * sigma * sigma)


class SeparableNonlinearity:
    """Nonlinearity of the form scale * A(wbar, delta_p) * B(wbar, delta_k).

    With p_{1,2} = wbar -+ delta_p and k_{1,2} = wbar -+ delta_k, the two
    factors can be integrated against their own Gaussians independently.
    """

    def __init__(
        self,
        outgoing: Callable[[np.ndarray, np.ndarray], np.ndarray],
        incoming: Callable[[np.ndarray, np.ndarray], np.ndarray],
        scale: complex,
    ):
        self.outgoing = outgoing
        self.incoming = incoming
        self.scale = scale

    def __call__(self, omega1, omega2, nu1, nu2):
        omega1, omega2 = np.asarray(omega1), np.asarray(omega2)
        nu1, nu2 = np.asarray(nu1), np.asarray(nu2)
        out = self.outgoing((omega1 + omega2) / 2.0, (omega2 - omega1) / 2.0)
        inc = self.incoming((nu1 + nu2) / 2.0, (nu2 - nu1) / 2.0)
        return self.scale * out * inc


def qubit_nonlinearity(params: QubitParams) -> SeparableNonlinearity:
    """`tmono` of a two-level emitter in separable form."""
    return SeparableNonlinearity(
        outgoing=lambda mean, delta: reflection(mean - delta, params) * reflection(mean + delta, params),
        incoming=lambda mean, delta: reflection(mean - delta, params) + reflection(mean + delta, params),
        scale=-1j / (np.pi * params.gamma),
    )


def forward_scattering_valid(momenta: Sequence[float], sigma: float) -> bool:
    """Every packet centre sits at least ten widths above zero."""
    return all(k >= FORWARD_SCATTERING_SIGMAS * sigma for k in momenta)


def _warn_forward(momenta: Sequence[float], sigma: float) -> None:
    if not forward_scattering_valid(momenta, sigma):
        logger.warning(
            f"Packet centres {tuple(round(k, 6) for k in momenta)} are within "
            f"{FORWARD_SCATTERING_SIGMAS:g} sigma of zero; the forward-scattering model may not hold"
        )


@lru_cache(maxsize=16)
def _gauss_hermite(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    # weights normalised to integrate exp(-x^2) / sqrt(pi)
    x, w = np.polynomial.hermite.hermgauss(nodes)
    return x, w / math.sqrt(math.pi)


def _checked(
    evaluate: Callable[[int], np.ndarray], quad: QuadratureConfig, what: str
) -> np.ndarray:
    value = np.asarray(evaluate(quad.nodes))
    if quad.check_nodes is None:
        return value
    check = np.asarray(evaluate(quad.check_nodes))
    scale = float(np.max(np.abs(check)))
    change = float(np.max(np.abs(check - value)))
    if change > quad.rtol * scale and change > 0:
        raise WaveguideError(
            f"{what}: Gauss-Hermite orders {quad.nodes} and {quad.check_nodes} differ by "
            f"{change / scale if scale else math.inf:.3e} relative (tolerance {quad.rtol:g}); "
            f"raise the quadrature order"
        )
    return value


def measured_single(
    p1: float,
    k1: float,
    spec: WavePacketSpec,
    params: QubitParams,
    quad: Optional[QuadratureConfig] = None,
) -> complex:
    """Single-photon element seen with Gaussian packets.

    S = exp(-(p1 - k1)^2 / 4 sigma^2) * integral G_sigma(k' - (k1 + p1)/2) t(k') dk'

    Raises:
        WaveguideError: If the quadrature has not converged
    """
    quad = quad or QuadratureConfig()
    _warn_forward((p1, k1), spec.sigma)
    sigma = spec.sigma
    center = (k1 + p1) / 2.0
    envelope = math.exp(-((p1 - k1) ** 2) / (4.0 * sigma * sigma))

    def evaluate(nodes: int) -> np.ndarray:
        x, w = _gauss_hermite(nodes)
        return np.asarray(np.sum(w * transmission(center + sigma * x, params)))

    return complex(envelope * _checked(evaluate, quad, "measured_single"))


def single_photon_curve(
    axis: GridAxis,
    spec: WavePacketSpec,
    params: QubitParams,
    quad: Optional[QuadratureConfig] = None,
) -> SampledSurface:
    """Diagonal S_kk over a grid of momenta."""
    quad = quad or QuadratureConfig()
    k = axis.values
    _warn_forward((float(k.min()),), spec.sigma)

    def evaluate(nodes: int) -> np.ndarray:
        x, w = _gauss_hermite(nodes)
        return transmission(k[:, None] + spec.sigma * x[None, :], params) @ w

    values = _checked(evaluate, quad, "single_photon_curve")
    return SampledSurface(axes=(axis,), values=values, meta={"sigma": spec.sigma, "gamma": params.gamma})


def _prefactor(spec: WavePacketSpec, sum_mismatch: float) -> float:
    sigma = spec.sigma
    return 2.0 * sigma * math.sqrt(math.pi) * math.exp(-(sum_mismatch**2) / (8.0 * sigma * sigma))


def measured_T(
    coords: TCoordinates,
    spec: WavePacketSpec,
    params: QubitParams,
    quad: Optional[QuadratureConfig] = None,
    nonlinearity: Optional[Nonlinearity] = None,
) -> complex:
    """Two-photon element seen with Gaussian packets.

    T = 2 sigma sqrt(pi) exp(-dS^2 / 8 sigma^2)
        * integral G(sqrt(2)(wbar' - c)) G(dp' - dp) G(dk' - dk) Tbar(p', k') dwbar' ddp' ddk'

    with c = khat + dS / 4, evaluated on a tensor Gauss-Hermite grid.

    Args:
        coords: Element coordinates
        spec: Packet width
        params: Emitter parameters (used when no nonlinearity is given)
        quad: Quadrature order and convergence check
        nonlinearity: Tbar(omega1, omega2, nu1, nu2); the two-level emitter by default

    Raises:
        WaveguideError: If the quadrature has not converged
    """
    quad = quad or QuadratureConfig()
    nonlinearity = nonlinearity or qubit_nonlinearity(params)
    _warn_forward(coords.to_momenta(), spec.sigma)
    sigma = spec.sigma
    center = coords.khat + coords.sum_mismatch / 4.0

    def evaluate(nodes: int) -> np.ndarray:
        x, w = _gauss_hermite(nodes)
        mean = center + sigma * x / math.sqrt(2.0)
        dp = coords.delta_p + sigma * x
        dk = coords.delta_k + sigma * x
        W, P, K = np.meshgrid(mean, dp, dk, indexing="ij")
        values = nonlinearity(W - P, W + P, W - K, W + K)
        return np.asarray(np.einsum("i,j,k,ijk->", w, w, w, values) / math.sqrt(2.0))

    return complex(_prefactor(spec, coords.sum_mismatch) * _checked(evaluate, quad, "measured_T"))


def _separable_slice(
    khat: float,
    delta_p: np.ndarray,
    delta_k: np.ndarray,
    spec: WavePacketSpec,
    nonlinearity: SeparableNonlinearity,
    nodes: int,
    sum_mismatch: float,
) -> np.ndarray:
    x, w = _gauss_hermite(nodes)
    sigma = spec.sigma
    mean = khat + sum_mismatch / 4.0 + sigma * x / math.sqrt(2.0)
    offsets = sigma * x
    # out_factor[i, a] = int G(dp' - dp_a) A(wbar_i, dp') ddp'
    out_factor = nonlinearity.outgoing(mean[:, None, None], delta_p[None, :, None] + offsets[None, None, :]) @ w
    in_factor = nonlinearity.incoming(mean[:, None, None], delta_k[None, :, None] + offsets[None, None, :]) @ w
    combined = np.einsum("i,ia,ib->ab", w, out_factor, in_factor) / math.sqrt(2.0)
    return _prefactor(spec, sum_mismatch) * nonlinearity.scale * combined


def _generic_slice(
    khat: float,
    delta_p: np.ndarray,
    delta_k: np.ndarray,
    spec: WavePacketSpec,
    nonlinearity: Nonlinearity,
    nodes: int,
    sum_mismatch: float,
) -> np.ndarray:
    x, w = _gauss_hermite(nodes)
    sigma = spec.sigma
    mean = khat + sum_mismatch / 4.0 + sigma * x / math.sqrt(2.0)
    out = np.empty((delta_p.size, delta_k.size), dtype=np.complex128)
    W, X1, X2 = np.meshgrid(mean, sigma * x, sigma * x, indexing="ij")
    for a, dp in enumerate(delta_p):
        for b, dk in enumerate(delta_k):
            P, K = dp + X1, dk + X2
            values = nonlinearity(W - P, W + P, W - K, W + K)
            out[a, b] = np.einsum("i,j,k,ijk->", w, w, w, values) / math.sqrt(2.0)
    return _prefactor(spec, sum_mismatch) * out


def _slice(
    khat: float,
    delta_p: np.ndarray,
    delta_k: np.ndarray,
    spec: WavePacketSpec,
    nonlinearity: Nonlinearity,
    nodes: int,
    sum_mismatch: float,
) -> np.ndarray:
    if isinstance(nonlinearity, SeparableNonlinearity):
        return _separable_slice(khat, delta_p, delta_k, spec, nonlinearity, nodes, sum_mismatch)
    return _generic_slice(khat, delta_p, delta_k, spec, nonlinearity, nodes, sum_mismatch)


def t_surface_slices(
    khat_axis: GridAxis,
    delta_p_axis: GridAxis,
    delta_k_axis: GridAxis,
    spec: WavePacketSpec,
    params: QubitParams,
    quad: Optional[QuadratureConfig] = None,
    nonlinearity: Optional[Nonlinearity] = None,
    sum_mismatch: float = 0.0,
) -> Iterator[np.ndarray]:
    """Yield the measured T surface one khat slice at a time, shape (delta_p, delta_k).

    The quadrature order check runs on the first, central and last slices.

    Raises:
        WaveguideError: If the checked slices have not converged
    """
    quad = quad or QuadratureConfig()
    nonlinearity = nonlinearity or qubit_nonlinearity(params)
    delta_p, delta_k = delta_p_axis.values, delta_k_axis.values
    khats = khat_axis.values
    lowest = float(khats.min() - max(abs(delta_p).max(), abs(delta_k).max()))
    _warn_forward((lowest,), spec.sigma)

    checked = {0, khat_axis.count // 2, khat_axis.count - 1}
    for index, khat in enumerate(khats):

        def evaluate(nodes: int, khat: float = float(khat)) -> np.ndarray:
            return _slice(khat, delta_p, delta_k, spec, nonlinearity, nodes, sum_mismatch)

        if index in checked:
            yield _checked(evaluate, quad, f"t_surface slice khat={khat:g}")
        else:
            yield evaluate(quad.nodes)


def t_surface(
    khat_axis: GridAxis,
    delta_p_axis: GridAxis,
    delta_k_axis: GridAxis,
    spec: WavePacketSpec,
    params: QubitParams,
    quad: Optional[QuadratureConfig] = None,
    nonlinearity: Optional[Nonlinearity] = None,
    sum_mismatch: float = 0.0,
    threads: Optional[int] = None,
) -> SampledSurface:
    """Measured T on a (khat, delta_p, delta_k) grid.

    Args:
        khat_axis: Average-momentum axis (count 1 for a fixed khat)
        delta_p_axis: Outgoing relative-momentum axis
        delta_k_axis: Incoming relative-momentum axis
        spec: Packet width
        params: Emitter parameters
        quad: Quadrature order and convergence check
        nonlinearity: Tbar; the separable two-level emitter by default
        sum_mismatch: Off-shell p_1 + p_2 - k_1 - k_2
        threads: Worker threads over khat slices (settings default)

    Returns:
        Surface with axes (khat, delta_p, delta_k)
    """
    quad = quad or QuadratureConfig()
    try:
        workers = threads or settings.THREADS
        chunks = np.array_split(np.arange(khat_axis.count), min(workers, khat_axis.count))

        def run(indices: np.ndarray) -> list[np.ndarray]:
            if indices.size == 0:
                return []
            sub_axis = GridAxis(
                name=khat_axis.name,
                origin=float(khat_axis.values[indices[0]]),
                step=khat_axis.step,
                count=int(indices.size),
            )
            return list(
                t_surface_slices(sub_axis, delta_p_axis, delta_k_axis, spec, params, quad, nonlinearity, sum_mismatch)
            )

        with ThreadPoolExecutor(max_workers=workers) as pool:
            slices = [s for chunk in pool.map(run, chunks) for s in chunk]
        values = np.stack(slices, axis=0)
        logger.info(f"Computed measured T surface of shape {values.shape} at sigma={spec.sigma:g}")
        return SampledSurface(
            axes=(khat_axis, delta_p_axis, delta_k_axis),
            values=values,
            meta={"sigma": spec.sigma, "gamma": params.gamma, "omega0": params.omega0, "sum_mismatch": sum_mismatch},
        )
    except ScatTomoError:
        raise
    except Exception as e:
        logger.error(f"Error computing measured T surface: {e}", exc_info=True)
        raise


def tmono_surface(
    khat_axis: GridAxis, delta_p_axis: GridAxis, delta_k_axis: GridAxis, params: QubitParams
) -> SampledSurface:
    """Analytic Tbar on the same coordinates as `t_surface`."""
    K, P, D = np.meshgrid(khat_axis.values, delta_p_axis.values, delta_k_axis.values, indexing="ij")
    values = tmono(K - P, K + P, K - D, K + D, params)
    return SampledSurface(
        axes=(khat_axis, delta_p_axis, delta_k_axis),
        values=values,
        meta={"gamma": params.gamma, "omega0": params.omega0},
    )


def _fit(parameter: str, quantity: str, xs: Sequence[float], ys: Sequence[float], expected: float, tol: float) -> ScalingFit:
    if len(xs) < 2:
        raise WaveguideError(f"need at least two {parameter} values for a scaling fit")
    if min(ys) <= 0:
        raise WaveguideError(f"{quantity} vanished; cannot fit a power law")
    exponent = float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
    return ScalingFit(
        parameter=parameter,
        quantity=quantity,
        parameters=tuple(float(x) for x in xs),
        values=tuple(float(y) for y in ys),
        exponent=exponent,
        expected=expected,
        tolerance=tol,
        within_tolerance=abs(exponent - expected) <= tol,
    )


def sigma_scaling_study(
    sigmas: Sequence[float],
    delta_axis: GridAxis,
    khat: float,
    params: QubitParams,
    quad: Optional[QuadratureConfig] = None,
) -> ScalingFit:
    """Exponent of max |measured T| over a (delta_p, delta_k) grid against sigma."""
    khat_axis = GridAxis(name="khat", origin=khat, step=1.0, count=1)
    peaks = []
    for sigma in sigmas:
        surface = t_surface(
            khat_axis,
            delta_axis.model_copy(update={"name": "delta_p"}),
            delta_axis.model_copy(update={"name": "delta_k"}),
            WavePacketSpec(sigma=sigma),
            params,
            quad,
        )
        peaks.append(float(np.max(np.abs(surface.values))))
    fit = _fit("sigma", "max_abs_T", sigmas, peaks, expected=1.0, tol=0.1)
    logger.info(f"max |T| scales as sigma^{fit.exponent:.3f}")
    return fit


def single_photon_limit_study(
    sigmas: Sequence[float],
    k: float,
    params: QubitParams,
    quad: Optional[QuadratureConfig] = None,
) -> ScalingFit:
    """Exponent of |S_kk - t_k| against sigma on the diagonal."""
    target = complex(transmission(k, params))
    errors = [abs(measured_single(k, k, WavePacketSpec(sigma=s), params, quad) - target) for s in sigmas]
    fit = _fit("sigma", "abs_S_minus_t", sigmas, errors, expected=2.0, tol=0.3)
    logger.info(f"|S_kk - t_k| scales as sigma^{fit.exponent:.3f}")
    return fit
