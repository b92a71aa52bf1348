"""Truncated multimode Fock-space algebra used as the exact brute-force oracle.

Mode indices are 0-based. Basis vectors are ordered by total photon number and,
inside a sector, by descending lexicographic order of the occupation vector.
"""

from __future__ import annotations

import itertools
import logging
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import linalg, sparse, stats
from scipy.special import gammaln

from scattomo.config import settings
from scattomo.exceptions import HilbertError
from scattomo.schemas.hilbert_schemas import BasisSpec, StateVector, TruncatedUnitary, UnitaryKind

logger = logging.getLogger(__name__)

Occupation = tuple[int, ...]


def basis_dimension(spec: BasisSpec) -> int:
    """Number of occupation vectors with at most `photon_cutoff` photons."""
    return spec.dimension


def _check_size(mode_count: int, photon_cutoff: int) -> None:
    dim = BasisSpec(mode_count=mode_count, photon_cutoff=photon_cutoff).dimension
    cap = settings.MAX_BASIS_DIMENSION
    if dim > cap:
        raise HilbertError(
            f"basis with M={mode_count}, n_max={photon_cutoff} has {dim} states, above the cap of {cap}; "
            f"lower photon_cutoff or raise SCATTOMO_MAX_BASIS_DIMENSION"
        )


@lru_cache(maxsize=32)
def _fock_tables(mode_count: int, photon_cutoff: int) -> tuple[tuple[Occupation, ...], dict[Occupation, int]]:
    _check_size(mode_count, photon_cutoff)
    states: list[Occupation] = []
    for photons in range(photon_cutoff + 1):
        # combinations_with_replacement yields sorted mode multisets, which maps to
        # descending lexicographic occupation vectors
        for modes in itertools.combinations_with_replacement(range(mode_count), photons):
            occupation = [0] * mode_count
            for mode in modes:
                occupation[mode] += 1
            states.append(tuple(occupation))
    basis = tuple(states)
    return basis, {state: index for index, state in enumerate(basis)}


def enumerate_basis(spec: BasisSpec) -> list[Occupation]:
    """List the occupation vectors of the truncated space in canonical order.

    Args:
        spec: Shape of the truncated space

    Returns:
        Sector-ordered list of occupation tuples

    Raises:
        HilbertError: If the dimension exceeds the configured cap
    """
    basis, _ = _fock_tables(spec.mode_count, spec.photon_cutoff)
    return list(basis)


def _occupations(spec: BasisSpec) -> np.ndarray:
    basis, _ = _fock_tables(spec.mode_count, spec.photon_cutoff)
    return np.array(basis, dtype=np.int64).reshape(len(basis), spec.mode_count)


def _check_mode(spec: BasisSpec, mode: int) -> None:
    if not 0 <= mode < spec.mode_count:
        raise HilbertError(f"mode index {mode} outside 0..{spec.mode_count - 1}")


@lru_cache(maxsize=256)
def _annihilator(mode_count: int, photon_cutoff: int, mode: int) -> sparse.csr_matrix:
    basis, index = _fock_tables(mode_count, photon_cutoff)
    rows, cols, data = [], [], []
    for col, occupation in enumerate(basis):
        n = occupation[mode]
        if n == 0:
            continue
        lowered = occupation[:mode] + (n - 1,) + occupation[mode + 1 :]
        rows.append(index[lowered])
        cols.append(col)
        data.append(np.sqrt(n))
    dim = len(basis)
    return sparse.coo_matrix((data, (rows, cols)), shape=(dim, dim), dtype=np.complex128).tocsr()


def annihilation_operator(spec: BasisSpec, mode: int) -> sparse.csr_matrix:
    """Sparse ladder operator a_mode on the truncated space."""
    _check_mode(spec, mode)
    return _annihilator(spec.mode_count, spec.photon_cutoff, mode)


def creation_operator(spec: BasisSpec, mode: int) -> sparse.csr_matrix:
    """Adjoint of `annihilation_operator`; states at the cutoff are mapped to zero."""
    return annihilation_operator(spec, mode).T.tocsr()


def number_operator(spec: BasisSpec) -> sparse.csr_matrix:
    totals = _occupations(spec).sum(axis=1).astype(np.complex128)
    return sparse.diags(totals, format="csr")


def poisson_tail(mean_photons: float, photon_cutoff: int) -> float:
    """Probability of more than `photon_cutoff` photons in a coherent state."""
    return float(stats.poisson.sf(photon_cutoff, mean_photons))


def recommended_cutoff(mean_photons: float, m: int = 0, tol: float | None = None) -> int:
    """Smallest cutoff whose Poisson tail is below `tol`, clamped to at least m + 2."""
    tol = settings.TRUNCATION_TOL if tol is None else tol
    cutoff = 1
    while poisson_tail(mean_photons, cutoff) >= tol:
        cutoff += 1
    return max(cutoff, m + 2)


def vacuum_state(spec: BasisSpec) -> StateVector:
    amplitudes = np.zeros(spec.dimension, dtype=np.complex128)
    amplitudes[0] = 1.0
    return StateVector(basis=spec, amplitudes=amplitudes)


def coherent_state(
    spec: BasisSpec, alphas: Sequence[complex], truncation_tol: float | None = None
) -> StateVector:
    """Build the truncated multimode coherent state |alpha_1, ..., alpha_M>.

    Args:
        spec: Shape of the truncated space
        alphas: One complex displacement per mode
        truncation_tol: Largest tolerated discarded probability (settings default)

    Returns:
        Unit-norm state with the discarded Poisson tail recorded in `tail_weight`

    Raises:
        HilbertError: If the tail exceeds the tolerance
    """
    tol = settings.TRUNCATION_TOL if truncation_tol is None else truncation_tol
    alphas = np.asarray(alphas, dtype=np.complex128)
    if alphas.shape != (spec.mode_count,):
        raise HilbertError(f"expected {spec.mode_count} displacements, got {alphas.shape[0] if alphas.ndim else 0}")

    mean_photons = float(np.sum(np.abs(alphas) ** 2))
    tail = poisson_tail(mean_photons, spec.photon_cutoff)
    if tail >= tol:
        required = recommended_cutoff(mean_photons, 0, tol)
        raise HilbertError(
            f"coherent state with |alpha|^2={mean_photons:g} loses {tail:.3e} beyond n_max={spec.photon_cutoff}; "
            f"n_max >= {required} is required for truncation_tol={tol:g}"
        )

    occupations = _occupations(spec)
    n_max = spec.photon_cutoff
    # powers[j, n] = alpha_j**n, built by repeated products so that 0**0 == 1
    powers = np.ones((spec.mode_count, n_max + 1), dtype=np.complex128)
    for n in range(1, n_max + 1):
        powers[:, n] = powers[:, n - 1] * alphas
    inv_sqrt_factorial = np.exp(-0.5 * gammaln(np.arange(n_max + 1) + 1.0))
    per_mode = powers[np.arange(spec.mode_count), occupations] * inv_sqrt_factorial[occupations]
    amplitudes = np.prod(per_mode, axis=1) * np.exp(-0.5 * mean_photons)
    amplitudes = amplitudes / np.linalg.norm(amplitudes)
    return StateVector(basis=spec, amplitudes=amplitudes, tail_weight=tail)


def apply_annihilation(state: StateVector, mode: int) -> StateVector:
    """Apply a_mode; the result is not renormalized."""
    op = annihilation_operator(state.basis, mode)
    return StateVector(basis=state.basis, amplitudes=op @ state.amplitudes, tail_weight=state.tail_weight)


def _haar_unitary(size: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))) / np.sqrt(2.0)
    q, r = linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def unitarity_defect(unitary: TruncatedUnitary) -> float:
    """Max-norm distance of U^dagger U from the identity."""
    matrix = unitary.matrix
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0]))))


def random_unitary(spec: BasisSpec, kind: UnitaryKind, seed: int) -> TruncatedUnitary:
    """Draw a vacuum-fixing unitary on the truncated space.

    Args:
        spec: Shape of the truncated space
        kind: elastic (Haar block per photon-number sector), general-vacuum-fixing
            (Haar on the vacuum complement) or identity
        seed: Seed of the numpy generator; equal seeds give bit-identical matrices

    Returns:
        The generated unitary

    Raises:
        HilbertError: If the construction misses the unitarity tolerance
    """
    kind = UnitaryKind(kind)
    dim = spec.dimension
    rng = np.random.default_rng(seed)
    matrix = np.zeros((dim, dim), dtype=np.complex128)
    matrix[0, 0] = 1.0

    if kind is UnitaryKind.IDENTITY:
        matrix = np.eye(dim, dtype=np.complex128)
    elif kind is UnitaryKind.ELASTIC:
        start = 1
        for photons in range(1, spec.photon_cutoff + 1):
            size = spec.sector_dimension(photons)
            matrix[start : start + size, start : start + size] = _haar_unitary(size, rng)
            start += size
    else:
        matrix[1:, 1:] = _haar_unitary(dim - 1, rng)

    unitary = TruncatedUnitary(basis=spec, matrix=matrix, kind=kind)
    defect = unitarity_defect(unitary)
    if defect >= settings.UNITARITY_TOL:
        raise HilbertError(f"generated {kind.value} unitary has defect {defect:.3e}")
    logger.debug(f"Drew {kind.value} unitary of dimension {dim} with seed {seed}")
    return unitary


def _lower(spec: BasisSpec, vector: np.ndarray, modes: Sequence[int]) -> np.ndarray:
    for mode in modes:
        vector = annihilation_operator(spec, mode) @ vector
    return vector


def correlation(unitary: TruncatedUnitary, state: StateVector, output_modes: Sequence[int]) -> complex:
    """Exact <psi| U^dagger a_p1 ... a_pn U |psi> on the truncated space."""
    if state.basis != unitary.basis:
        raise HilbertError("state and unitary live on different bases")
    if len(output_modes) == 0:
        raise HilbertError("correlation needs at least one output mode")
    for mode in output_modes:
        _check_mode(unitary.basis, mode)
    scattered = unitary.matrix @ state.amplitudes
    lowered = _lower(unitary.basis, scattered, output_modes)
    return complex(np.vdot(scattered, lowered))


def exact_s_element(unitary: TruncatedUnitary, out_modes: Sequence[int], in_modes: Sequence[int]) -> complex:
    """Ground-truth amplitude <0| a_p1 ... a_pn U a^dagger_k1 ... a^dagger_km |0>.

    Raises:
        HilbertError: If either photon number exceeds the cutoff
    """
    spec = unitary.basis
    if max(len(out_modes), len(in_modes)) > spec.photon_cutoff:
        raise HilbertError(
            f"S element with {len(in_modes)} input and {len(out_modes)} output photons needs n_max >= "
            f"{max(len(out_modes), len(in_modes))}, have {spec.photon_cutoff}"
        )
    for mode in (*out_modes, *in_modes):
        _check_mode(spec, mode)
    vector = vacuum_state(spec).amplitudes.copy()
    for mode in in_modes:
        vector = creation_operator(spec, mode) @ vector
    vector = _lower(spec, unitary.matrix @ vector, out_modes)
    return complex(vector[0])
