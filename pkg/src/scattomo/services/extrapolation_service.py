"""Z-order combinations of first-order estimates taken along a power ladder."""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from scattomo.config import settings
from scattomo.exceptions import ExtrapolationError, ScatTomoError
from scattomo.schemas.extrapolation_schemas import BoundRow, EstimateLadder, OrderFit, PowerLadder, WeightVector
from scattomo.schemas.hilbert_schemas import TruncatedUnitary
from scattomo.schemas.protocol_schemas import Estimate, PlanKind, SectorTarget
from scattomo.services import hilbert_service, protocol_service

logger = logging.getLogger(__name__)

POWER_MATCH_RTOL = 1e-9
CANCELLATION_RATIO = 1e-3
SERIES_RTOL = 1e-16
MAX_SERIES_TERMS = 500
MIN_FIT_POINTS = 4
ERROR_FLOOR = 1e-13
ORDER_TOLERANCE = 0.2


def _exact_weights(Z: int, b: Fraction) -> list[Fraction]:
    # S^(mu)(x) = (b^(mu-1) S^(mu-1)(x) - S^(mu-1)(b x)) / (b^(mu-1) - 1), expanded into rungs
    w = [Fraction(1)]
    for mu in range(2, Z + 1):
        scale = b ** (mu - 1)
        w = [(scale * low - high) / (scale - 1) for low, high in zip(w + [Fraction(0)], [Fraction(0)] + w)]
    return w


def weights(Z: int, b: float) -> WeightVector:
    """Weights w_q^(Z) turning Z first-order estimates into a Z-order estimate.

    The recursion is expanded in exact rational arithmetic, so the weight-sum and
    order-cancellation identities hold exactly before rounding to floats.

    Args:
        Z: Order (number of ladder rungs)
        b: Ladder factor > 1

    Returns:
        Float weights together with their exact rational form

    Raises:
        ExtrapolationError: If b <= 1, Z < 1 or b^(Z-1) overflows
    """
    if Z < 1:
        raise ExtrapolationError(f"Z must be >= 1, got {Z}")
    if not b > 1:
        raise ExtrapolationError(f"ladder factor b must be > 1, got {b}")
    try:
        if not math.isfinite(float(b) ** (Z - 1)):
            raise OverflowError
    except OverflowError:
        raise ExtrapolationError(f"b^(Z-1) overflows for b={b}, Z={Z}")

    exact = _exact_weights(Z, Fraction(repr(float(b))))
    vector = WeightVector(
        Z=Z,
        b=b,
        weights=tuple(float(w) for w in exact),
        exact_weights=tuple((w.numerator, w.denominator) for w in exact),
    )
    if vector.condition_number > settings.CONDITION_WARNING:
        logger.warning(
            f"Weights for Z={Z}, b={b} have condition number {vector.condition_number:.3e}; "
            f"combinations will amplify estimate errors accordingly"
        )
    return vector


def combine_values(values: Sequence[complex], ladder: PowerLadder) -> complex:
    """sum_q w_q E(x_q), accumulated exactly over the float inputs."""
    if len(values) != ladder.Z:
        raise ExtrapolationError(f"expected {ladder.Z} estimates, got {len(values)}")
    vector = weights(ladder.Z, ladder.factor)
    if ladder.Z == 1:
        return complex(values[0])

    fractions = vector.fractions()
    real = sum((w * Fraction(complex(v).real) for w, v in zip(fractions, values)), Fraction(0))
    imag = sum((w * Fraction(complex(v).imag) for w, v in zip(fractions, values)), Fraction(0))
    combined = complex(float(real), float(imag))

    scale = math.fsum(abs(w) * abs(complex(v)) for w, v in zip(vector.weights, values))
    if scale > 0 and abs(combined) < CANCELLATION_RATIO * scale:
        logger.warning(
            f"Catastrophic cancellation in Z={ladder.Z} combination: |result| {abs(combined):.3e} "
            f"vs sum |w E| {scale:.3e}"
        )
    return combined


def combine(estimates: Sequence[Estimate], ladder: PowerLadder) -> complex:
    """Combine first-order estimates whose powers match the ladder rungs.

    Raises:
        ExtrapolationError: On a count, power or target mismatch
    """
    if len(estimates) != ladder.Z:
        raise ExtrapolationError(f"expected {ladder.Z} estimates, got {len(estimates)}")
    targets = {estimate.target for estimate in estimates}
    if len(targets) != 1:
        raise ExtrapolationError("all estimates must reconstruct the same element")
    for q, (estimate, power) in enumerate(zip(estimates, ladder.powers), start=1):
        if abs(estimate.power - power) > POWER_MATCH_RTOL * power:
            raise ExtrapolationError(f"estimate {q} was taken at power {estimate.power}, ladder expects {power}")
    return combine_values([estimate.value for estimate in estimates], ladder)


def _log_abs_ratio(b: float, Z: int, v: int) -> float:
    # log prod_j |(b^(Z-j) - b^v) / (b^(Z-j) - 1)| for j = 1..Z-1, with v >= Z
    log_b = math.log(b)
    total = 0.0
    for j in range(1, Z):
        e = Z - j
        numerator = v * log_b + math.log(-math.expm1((e - v) * log_b))
        denominator = math.log(math.expm1(e * log_b))
        total += numerator - denominator
    return total


def z_order_bound(
    M: int, m: int, base_power: float, b: float, Z: int, tail_terms: Optional[int] = None
) -> float:
    """Upper bound on the error of the Z-order estimate.

    M^(3m/2) sum_{v>=Z} |alpha|^(2v)/v! prod_{j=1}^{Z-1} |b^(Z-j) - b^v| / (b^(Z-j) - 1),
    summed with absolute term values in log space.

    Args:
        M: Number of input modes
        m: Input photon number of the element
        base_power: |alpha|^2 of the lowest rung
        b: Ladder factor
        Z: Order
        tail_terms: Fixed number of series terms; adaptive when omitted

    Raises:
        ExtrapolationError: On invalid parameters or when the series does not settle
    """
    if M < 1 or m < 0 or Z < 1 or base_power < 0 or not b > 1:
        raise ExtrapolationError(f"invalid bound parameters M={M}, m={m}, |alpha|^2={base_power}, b={b}, Z={Z}")
    if base_power == 0:
        return 0.0

    log_prefactor = 1.5 * m * math.log(M)
    log_x = math.log(base_power)
    limit = tail_terms if tail_terms is not None else MAX_SERIES_TERMS
    partial = 0.0
    previous = math.inf
    for count in range(limit):
        v = Z + count
        term = math.exp(log_prefactor + v * log_x - gammaln(v + 1.0) + _log_abs_ratio(b, Z, v))
        partial += term
        if tail_terms is None and term < SERIES_RTOL * partial and term < previous:
            return partial
        previous = term
    if tail_terms is None:
        raise ExtrapolationError(
            f"bound series did not converge within {MAX_SERIES_TERMS} terms (|alpha|^2={base_power}, b={b}, Z={Z})"
        )
    return partial


def bound_grid(M: int, m: int, powers: Sequence[float], b: float, Z_values: Sequence[int]) -> list[BoundRow]:
    """Bound for every (power, Z) pair, power-major."""
    return [
        BoundRow(alpha2=float(x), Z=Z, b=b, bound=z_order_bound(M, m, float(x), b, Z))
        for x in powers
        for Z in Z_values
    ]


def optimal_order(M: int, m: int, power: float, b: float, Z_max: int) -> int:
    """Order with the smallest bound; higher orders start amplifying again."""
    bounds = [z_order_bound(M, m, power, b, Z) for Z in range(1, Z_max + 1)]
    return int(np.argmin(bounds)) + 1


def estimate_ladder(
    oracle: TruncatedUnitary,
    kind: PlanKind,
    input_modes: Sequence[int],
    target: SectorTarget,
    ladder: PowerLadder,
    output_modes: Sequence[int],
    N: int,
    threads: Optional[int] = None,
) -> EstimateLadder:
    """Run noiseless first-order reconstructions at every rung and combine them.

    Args:
        oracle: Scatterer unitary
        kind: Plan family
        input_modes: Register modes carrying the coherent inputs
        target: Element to reconstruct
        ladder: Power ladder
        output_modes: Port assignment
        N: Port count

    Returns:
        Per-rung estimates, the combination, its bound and the exact element
    """
    try:
        M = len(input_modes)
        estimates = []
        for power in ladder.powers:
            plan = protocol_service.build_input_plan(
                kind, M, protocol_service.equal_magnitudes(M, power), input_modes
            )
            records = protocol_service.simulate_records(oracle, plan, output_modes, N, threads=threads)
            estimates.append(protocol_service.reconstruct(records, plan, target, N))
        combined = combine(estimates, ladder)
        exact = hilbert_service.exact_s_element(oracle, target.p_modes, target.k_modes)
        bound = z_order_bound(max(M, N), target.m, ladder.base_power, ladder.factor, ladder.Z)
        return EstimateLadder(
            target=target,
            ladder=ladder,
            estimates=tuple(e.value for e in estimates),
            combined=combined,
            bound=bound,
            exact=exact,
        )
    except ScatTomoError:
        raise
    except Exception as e:
        logger.error(f"Error running estimate ladder: {e}", exc_info=True)
        raise


def empirical_order_study(
    oracle: TruncatedUnitary,
    target: SectorTarget,
    output_modes: Sequence[int],
    N: int,
    input_modes: Optional[Sequence[int]] = None,
    Z_values: Sequence[int] = (1, 2, 3),
    b: float = 2.0,
    base_powers: Optional[Sequence[float]] = None,
    kind: PlanKind = PlanKind.ELASTIC,
) -> list[OrderFit]:
    """Fit the exponent of |error| against the base power for each order.

    Points whose error falls under the round-off floor are dropped; each fit
    needs at least four surviving points.

    Raises:
        ExtrapolationError: If too few points survive for some Z
    """
    input_modes = tuple(input_modes) if input_modes is not None else target.k_modes
    if base_powers is None:
        base_powers = np.geomspace(0.005, 0.05, 6)

    fits = []
    for Z in Z_values:
        powers, errors = [], []
        for x in base_powers:
            ladder = PowerLadder(base_power=float(x), factor=b, Z=Z)
            result = estimate_ladder(oracle, kind, input_modes, target, ladder, output_modes, N)
            if result.error is not None and result.error >= ERROR_FLOOR:
                powers.append(float(x))
                errors.append(result.error)
        if len(powers) < MIN_FIT_POINTS:
            raise ExtrapolationError(f"only {len(powers)} usable points for Z={Z}; need {MIN_FIT_POINTS}")
        slope = float(np.polyfit(np.log(powers), np.log(errors), 1)[0])
        logger.info(f"Z={Z}: error exponent {slope:.3f} over {len(powers)} powers")
        fits.append(
            OrderFit(
                Z=Z,
                slope=slope,
                points=len(powers),
                powers=tuple(powers),
                errors=tuple(errors),
                within_tolerance=abs(slope - Z) <= ORDER_TOLERANCE * Z,
            )
        )
    return fits
