import logging
import math

import numpy as np
import pytest

from scattomo.exceptions import WaveguideError
from scattomo.schemas.waveguide_schemas import GridAxis, QuadratureConfig, TCoordinates, WavePacketSpec
from scattomo.services import waveguide_service

SMALL_QUAD = QuadratureConfig(nodes=30, check_nodes=40, rtol=1e-6)


class TestMonochromatic:
    """Plane-wave amplitudes of the two-level emitter."""

    def test_resonance(self, qubit):
        assert waveguide_service.reflection(100.0, qubit) == pytest.approx(-1.0)
        assert waveguide_service.transmission(100.0, qubit) == pytest.approx(0.0)

    @pytest.mark.parametrize("detuning", [-3.0, -0.5, 0.0, 0.7, 4.0])
    def test_flux_conservation(self, qubit, detuning):
        r = waveguide_service.reflection(100.0 + detuning, qubit)
        t = waveguide_service.transmission(100.0 + detuning, qubit)
        assert abs(r) ** 2 + abs(t) ** 2 == pytest.approx(1.0)

    def test_separable_form_matches_tmono(self, qubit):
        rng = np.random.default_rng(0)
        omega = 100.0 + rng.uniform(-3, 3, size=(4, 16))
        nonlinearity = waveguide_service.qubit_nonlinearity(qubit)
        assert np.allclose(nonlinearity(*omega), waveguide_service.tmono(*omega, qubit), rtol=1e-12)

    def test_tmono_symmetry(self, qubit):
        """Tbar is symmetric under exchange of either photon pair."""
        args = (101.2, 99.1, 100.4, 99.9)
        value = waveguide_service.tmono(*args, qubit)
        assert waveguide_service.tmono(args[1], args[0], args[2], args[3], qubit) == pytest.approx(value)
        assert waveguide_service.tmono(args[0], args[1], args[3], args[2], qubit) == pytest.approx(value)

    def test_gaussian_profile_is_normalised(self):
        x = np.linspace(-5, 5, 2001)
        dx = x[1] - x[0]
        assert np.sum(waveguide_service.gaussian_profile(x, 0.7)) * dx == pytest.approx(1.0, rel=1e-9)


class TestSinglePhoton:
    """Single-photon elements seen through Gaussian packets."""

    def test_monochromatic_limit(self, qubit):
        """At sigma = 1e-3 gamma the diagonal reproduces t_k over |k - omega0| <= 4 gamma."""
        axis = GridAxis.centered("k", 100.0, 4.0, 0.25)
        curve = waveguide_service.single_photon_curve(axis, WavePacketSpec(sigma=1e-3), qubit)
        expected = waveguide_service.transmission(axis.values, qubit)
        scale = float(np.max(np.abs(expected)))
        assert np.max(np.abs(np.asarray(curve.values) - expected)) <= 1e-4 * scale
        assert waveguide_service.measured_single(100.5, 100.5, WavePacketSpec(sigma=1e-3), qubit) == pytest.approx(
            complex(waveguide_service.transmission(100.5, qubit)), rel=1e-4
        )

    def test_off_diagonal_envelope(self, qubit):
        sigma = 0.05
        spec = WavePacketSpec(sigma=sigma)
        diagonal = waveguide_service.measured_single(100.3, 100.3, spec, qubit)
        shifted = waveguide_service.measured_single(100.3 + sigma, 100.3 - sigma, spec, qubit)
        assert shifted == pytest.approx(math.exp(-1.0) * diagonal, rel=1e-9)

    def test_single_photon_limit_is_second_order(self, qubit):
        fit = waveguide_service.single_photon_limit_study((0.01, 0.02, 0.04, 0.08), 100.5, qubit)
        assert fit.exponent == pytest.approx(2.0, abs=0.3)
        assert fit.within_tolerance

    def test_forward_scattering_warning(self, qubit, caplog):
        assert not waveguide_service.forward_scattering_valid((1.0, 5.0), 0.2)
        assert waveguide_service.forward_scattering_valid((100.0, 101.0), 0.2)
        with caplog.at_level(logging.WARNING):
            waveguide_service.measured_single(1.0, 1.0, WavePacketSpec(sigma=0.2), qubit)
        assert "forward-scattering" in caplog.text


class TestMeasuredT:
    """Two-photon nonlinear elements seen through Gaussian packets."""

    def test_small_sigma_limit(self, qubit):
        """T -> sigma sqrt(2 pi) Tbar as sigma -> 0."""
        sigma = 1e-3
        coords = TCoordinates(khat=101.0, delta_k=0.4, delta_p=-0.7)
        value = waveguide_service.measured_T(coords, WavePacketSpec(sigma=sigma), qubit, SMALL_QUAD)
        expected = sigma * math.sqrt(2 * math.pi) * waveguide_service.tmono(*_tbar_args(coords), qubit)
        assert value == pytest.approx(expected, rel=1e-4)

    def test_surface_matches_pointwise_evaluation(self, qubit):
        spec = WavePacketSpec(sigma=0.3)
        khat = GridAxis(name="khat", origin=101.0, step=0.5, count=2)
        delta_p = GridAxis.centered("delta_p", 0.0, 1.0, 1.0)
        delta_k = GridAxis.centered("delta_k", 0.0, 1.0, 1.0)
        surface = waveguide_service.t_surface(khat, delta_p, delta_k, spec, qubit, SMALL_QUAD)
        assert surface.axis_names == ("khat", "delta_p", "delta_k")
        assert surface.values.shape == (2, 3, 3)
        coords = TCoordinates(khat=101.5, delta_p=1.0, delta_k=-1.0)
        pointwise = waveguide_service.measured_T(coords, spec, qubit, SMALL_QUAD)
        assert surface.values[1, 2, 0] == pytest.approx(pointwise, rel=1e-10)

    def test_generic_nonlinearity_path(self, qubit):
        """A plain callable gives the same surface as the separable fast path."""
        spec = WavePacketSpec(sigma=0.3)
        khat = GridAxis(name="khat", origin=101.0, step=1.0, count=1)
        delta = GridAxis.centered("delta_p", 0.0, 0.5, 0.5)
        delta_k = delta.model_copy(update={"name": "delta_k"})
        separable = waveguide_service.t_surface(khat, delta, delta_k, spec, qubit, SMALL_QUAD)
        generic = waveguide_service.t_surface(
            khat, delta, delta_k, spec, qubit, SMALL_QUAD, nonlinearity=lambda *w: waveguide_service.tmono(*w, qubit)
        )
        assert np.allclose(generic.values, separable.values, rtol=1e-10, atol=0)

    def test_threads_do_not_change_results(self, qubit):
        spec = WavePacketSpec(sigma=0.4)
        khat = GridAxis(name="khat", origin=100.5, step=0.25, count=5)
        delta_p = GridAxis.centered("delta_p", 0.0, 1.0, 0.5)
        delta_k = GridAxis.centered("delta_k", 0.0, 1.0, 0.5)
        serial = waveguide_service.t_surface(khat, delta_p, delta_k, spec, qubit, SMALL_QUAD, threads=1)
        parallel = waveguide_service.t_surface(khat, delta_p, delta_k, spec, qubit, SMALL_QUAD, threads=3)
        assert np.array_equal(serial.values, parallel.values)

    def test_unconverged_quadrature_raises(self, qubit):
        quad = QuadratureConfig(nodes=2, check_nodes=4, rtol=1e-12)
        with pytest.raises(WaveguideError) as exc_info:
            waveguide_service.measured_T(TCoordinates(khat=101.5, delta_p=1.0), WavePacketSpec(sigma=0.8), qubit, quad)
        assert "quadrature order" in str(exc_info.value)

    def test_nonlinear_term_is_first_order_in_sigma(self, qubit):
        delta = GridAxis.centered("delta", 0.0, 3.0, 0.25)
        fit = waveguide_service.sigma_scaling_study((0.01, 0.0178, 0.0316, 0.0562, 0.1), delta, 101.5, qubit)
        assert fit.exponent == pytest.approx(1.0, abs=0.1)
        assert fit.within_tolerance

    def test_tmono_surface_axes(self, qubit):
        khat = GridAxis(name="khat", origin=101.5, step=1.0, count=1)
        delta = GridAxis.centered("delta_p", 0.0, 1.0, 0.5)
        surface = waveguide_service.tmono_surface(khat, delta, delta.model_copy(update={"name": "delta_k"}), qubit)
        assert surface.values[0, 2, 2] == pytest.approx(waveguide_service.tmono(101.5, 101.5, 101.5, 101.5, qubit))


def _tbar_args(coords):
    k1, k2, p1, p2 = coords.to_momenta()
    return p1, p2, k1, k2
