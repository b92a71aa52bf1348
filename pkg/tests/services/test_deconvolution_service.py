import json
import logging
import math

import numpy as np
import pytest

from scattomo.exceptions import DeconvolutionError
from scattomo.schemas.deconvolution_schemas import DeconvolutionMethod, DeconvolutionReport, KernelConfig, TRegion
from scattomo.schemas.waveguide_schemas import GridAxis, QuadratureConfig, SampledSurface, WavePacketSpec
from scattomo.services import deconvolution_service, waveguide_service


def blurred_gaussian(
    sigma: float, width: float = 1.0, noise: float = 0.0, center: float = 0.0
) -> SampledSurface:
    """G_width blurred by G_sigma is G_sqrt(width^2 + sigma^2)."""
    axis = GridAxis.centered("k", 0.0, 12.0, 0.05)
    values = waveguide_service.gaussian_profile(axis.values - center, math.hypot(width, sigma))
    if noise:
        values = values + np.random.default_rng(3).normal(0.0, noise, size=axis.count)
    return SampledSurface(axes=(axis,), values=values)


@pytest.fixture
def small_region():
    return TRegion(khat=(101.0,), delta_half_width=1.0, step=0.2)


class TestKernelTerms:
    """Hermite polynomials and individual series terms."""

    @pytest.mark.parametrize(
        "n,x,expected",
        [(0, 0.3, 1.0), (1, 0.3, 0.6), (2, 3.0, 34.0), (3, -1.0, 4.0), (4, 0.5, 1.0)],
    )
    def test_hermite_values(self, n, x, expected):
        assert deconvolution_service.hermite(n, x) == pytest.approx(expected)

    def test_hermite_order_limit(self):
        with pytest.raises(DeconvolutionError):
            deconvolution_service.hermite(201, 0.1)
        with pytest.raises(DeconvolutionError):
            deconvolution_service.kernel_term(101, 0.1, 1.0)

    def test_kernel_term_matches_direct_formula(self):
        expected = (
            -1.0
            / (2**3 * math.factorial(3))
            * waveguide_service.gaussian_profile(0.7, 0.8)
            * deconvolution_service.hermite(6, 0.7 / 0.8)
        )
        assert deconvolution_service.kernel_term(3, 0.7, 0.8) == pytest.approx(float(expected), rel=1e-12)

    def test_zeroth_term_is_the_gaussian(self):
        u = np.linspace(-2, 2, 9)
        assert np.allclose(deconvolution_service.kernel_term(0, u, 0.6), waveguide_service.gaussian_profile(u, 0.6))

    def test_high_order_terms_stay_finite(self):
        u = np.linspace(-10, 10, 101)
        assert np.all(np.isfinite(deconvolution_service.kernel_term(100, u, 0.5)))


class TestDeconvolve1D:
    """Single-axis inverse kernel."""

    @pytest.mark.parametrize("method", [DeconvolutionMethod.SPECTRAL, DeconvolutionMethod.DIRECT])
    def test_recovers_unblurred_gaussian(self, method):
        cfg = KernelConfig(sigma=0.5, q_max=40, method=method)
        report = deconvolution_service.deconvolve_1d(blurred_gaussian(0.5), cfg, bounds=(-3.0, 3.0))
        axis = report.result.axes[0]
        assert axis.origin == pytest.approx(-3.0)
        assert axis.end == pytest.approx(3.0)
        expected = waveguide_service.gaussian_profile(axis.values, 1.0)
        assert np.max(np.abs(report.result.values - expected)) < 1e-5
        assert report.converged
        assert not report.warnings

    @pytest.mark.parametrize("ratio", [1.5, 2.0, 3.0])
    def test_gaussian_inputs_are_recovered_exactly(self, ratio):
        sigma = 0.5
        width = sigma * math.sqrt(ratio**2 - 1.0)
        report = deconvolution_service.deconvolve_1d(
            blurred_gaussian(sigma, width=width), KernelConfig(sigma=sigma), bounds=(-3.0, 3.0)
        )
        expected = waveguide_service.gaussian_profile(report.result.axes[0].values, width)
        error = np.max(np.abs(report.result.values - expected)) / np.max(expected)
        assert error < 1e-5

    def test_order_is_fixed_before_reading_data(self):
        cfg = KernelConfig(sigma=0.5)
        order, gain = deconvolution_service.series_order(deconvolution_service.nyquist_z(0.5, 0.05), cfg)
        assert 0 < order < cfg.q_max
        assert gain <= cfg.max_gain
        for surface in (blurred_gaussian(0.5), blurred_gaussian(0.5, width=2.0, center=1.0)):
            report = deconvolution_service.deconvolve_1d(surface, cfg, bounds=(-3.0, 3.0))
            assert report.series.order == order
            assert report.series.noise_gain == pytest.approx(gain)

    def test_linear_in_the_input(self):
        cfg = KernelConfig(sigma=0.5)
        f = blurred_gaussian(0.5)
        g = blurred_gaussian(0.5, width=0.8, center=0.7)
        h = SampledSurface(axes=f.axes, values=2.5 * f.values + g.values)
        reports = [deconvolution_service.deconvolve_1d(s, cfg, bounds=(-3.0, 3.0)) for s in (f, g, h)]
        assert len({r.orders_used for r in reports}) == 1
        combined = 2.5 * reports[0].result.values + reports[1].result.values
        scale = np.max(np.abs(combined))
        eps = np.finfo(float).eps
        assert np.max(np.abs(reports[2].result.values - combined)) < 1e3 * eps * reports[2].series.noise_gain * scale

    def test_linear_to_rounding_at_low_order(self):
        cfg = KernelConfig(sigma=0.5, q_max=10)
        f = blurred_gaussian(0.5)
        g = blurred_gaussian(0.5, width=0.8, center=0.7)
        h = SampledSurface(axes=f.axes, values=2.5 * f.values + g.values)
        rf, rg, rh = (deconvolution_service.deconvolve_1d(s, cfg, bounds=(-3.0, 3.0)) for s in (f, g, h))
        assert rf.series.order == rh.series.order == 10
        combined = 2.5 * rf.result.values + rg.result.values
        assert np.max(np.abs(rh.result.values - combined)) < 1e-12 * np.max(np.abs(combined))

    def test_default_bounds_keep_covered_points(self):
        cfg = KernelConfig(sigma=0.5)
        report = deconvolution_service.deconvolve_1d(blurred_gaussian(0.5), cfg)
        axis = report.result.axes[0]
        assert axis.origin >= -12.0 + cfg.coverage_sigmas * 0.5 - 1e-9
        assert axis.end <= 12.0 - cfg.coverage_sigmas * 0.5 + 1e-9

    def test_noise_stalls_the_series(self, caplog):
        cfg = KernelConfig(sigma=0.5, q_max=100)
        with caplog.at_level(logging.WARNING):
            report = deconvolution_service.deconvolve_1d(blurred_gaussian(0.5, noise=1e-3), cfg, bounds=(-3.0, 3.0))
        series = report.series
        assert series.stalled
        assert not series.converged
        assert cfg.stall_order <= series.orders_used < series.order
        assert len(series.increments) == series.order
        assert "stalled" in caplog.text

    def test_insufficient_coverage(self):
        cfg = KernelConfig(sigma=0.5)
        with pytest.raises(DeconvolutionError) as exc_info:
            deconvolution_service.deconvolve_1d(blurred_gaussian(0.5), cfg, bounds=(-10.5, 10.5))
        assert "needs" in str(exc_info.value)

    def test_coverage_can_be_waived(self):
        cfg = KernelConfig(sigma=0.5)
        report = deconvolution_service.deconvolve_1d(
            blurred_gaussian(0.5), cfg, bounds=(-10.5, 10.5), require_coverage=False
        )
        assert report.coverage_flag

    def test_bounds_outside_axis(self):
        with pytest.raises(DeconvolutionError):
            deconvolution_service.deconvolve_1d(blurred_gaussian(0.5), KernelConfig(sigma=0.5), bounds=(20.0, 30.0))

    def test_rejects_multi_axis_input(self):
        axes = (GridAxis(name="a", origin=0.0, step=1.0, count=2), GridAxis(name="b", origin=0.0, step=1.0, count=2))
        surface = SampledSurface(axes=axes, values=np.zeros((2, 2)))
        with pytest.raises(DeconvolutionError):
            deconvolution_service.deconvolve_1d(surface, KernelConfig(sigma=0.5))


class TestTwoPhotonRecovery:
    """Blur-then-deconvolve of the two-photon nonlinearity."""

    def test_measurement_axes(self):
        region = TRegion(khat=(101.0, 102.0), delta_half_width=1.0, step=0.2)
        khat, delta_p, delta_k = deconvolution_service.measurement_axes(region, 0.5, KernelConfig(sigma=0.5))
        assert khat.count == 50
        assert khat.origin == pytest.approx(96.6)
        assert delta_p.count == delta_k.count == 71
        assert delta_p.origin == pytest.approx(-7.0)

    def test_forward_check(self, qubit, small_region):
        spec = WavePacketSpec(sigma=0.5)
        check = deconvolution_service.convolution_forward_check(
            None, spec, KernelConfig(sigma=0.5), qubit, small_region
        )
        assert check.within_target
        assert check.residual < 0.01
        assert check.report.result.axis_names == ("khat", "delta_p", "delta_k")
        assert check.report.result.values.shape == (1, 11, 11)

    def test_streamed_recovery_matches_full_surface(self, qubit, small_region):
        cfg = KernelConfig(sigma=0.5)
        spec = WavePacketSpec(sigma=0.5)
        quad = QuadratureConfig(nodes=40, check_nodes=60, rtol=1e-6)
        streamed = deconvolution_service.recover_tmono(None, spec, qubit, small_region, cfg, quad)
        measured = waveguide_service.t_surface(
            *deconvolution_service.measurement_axes(small_region, 0.5, cfg), spec, qubit, quad
        )
        full = deconvolution_service.deconvolve_t_3d(
            measured, cfg, region={"khat": (101.0, 101.0), "delta_p": (-1.0, 1.0), "delta_k": (-1.0, 1.0)}
        )
        scale = float(np.max(np.abs(full.result.values)))
        assert np.allclose(streamed.result.values, full.result.values, rtol=0, atol=1e-6 * scale)

    def test_zero_surface_gives_zero(self):
        axes = (
            GridAxis.centered("khat", 101.0, 5.0, 0.25),
            GridAxis.centered("delta_p", 0.0, 5.0, 0.25),
            GridAxis.centered("delta_k", 0.0, 5.0, 0.25),
        )
        surface = SampledSurface(axes=axes, values=np.zeros((41, 41, 41)))
        report = deconvolution_service.deconvolve_t_3d(surface, KernelConfig(sigma=0.5))
        assert report.result.values.size > 0
        assert np.all(report.result.values == 0)
        assert not report.warnings
        assert not report.series.stalled

    def test_zero_order_leaves_the_blur(self, qubit, small_region):
        spec = WavePacketSpec(sigma=0.5)
        blurred = deconvolution_service.convolution_forward_check(
            None, spec, KernelConfig(sigma=0.5, q_max=0), qubit, small_region
        )
        full = deconvolution_service.convolution_forward_check(None, spec, KernelConfig(sigma=0.5), qubit, small_region)
        assert blurred.orders_used == 0
        assert blurred.report.series.increments == ()
        assert full.orders_used > 0
        assert blurred.residual > 0.05
        assert blurred.residual > 10 * full.residual

    def test_thin_margin_is_flagged(self, qubit, small_region):
        spec = WavePacketSpec(sigma=0.5)
        thin = deconvolution_service.convolution_forward_check(
            None, spec, KernelConfig(sigma=0.5, margin_sigmas=2.0), qubit, small_region
        )
        full = deconvolution_service.convolution_forward_check(None, spec, KernelConfig(sigma=0.5), qubit, small_region)
        assert thin.coverage_flag
        assert thin.report.coverage_flag
        assert not full.coverage_flag
        assert thin.residual > full.residual

    def test_report_serializes_to_json(self, qubit, small_region):
        report = deconvolution_service.recover_tmono(
            None, WavePacketSpec(sigma=0.5), qubit, small_region, KernelConfig(sigma=0.5)
        )
        document = json.loads(report.model_dump_json())
        assert set(document["result"]["values"]) == {"re", "im"}
        assert len(document["series"]["increments"]) == report.series.order
        restored = DeconvolutionReport.model_validate_json(report.model_dump_json())
        assert restored.series == report.series
        assert restored.result.axes == report.result.axes
        assert np.array_equal(restored.result.values, report.result.values)

    def test_width_mismatch(self, qubit, small_region):
        with pytest.raises(DeconvolutionError):
            deconvolution_service.recover_tmono(
                None, WavePacketSpec(sigma=0.4), qubit, small_region, KernelConfig(sigma=0.5)
            )

    def test_missing_axes(self):
        axes = tuple(GridAxis(name=n, origin=0.0, step=1.0, count=2) for n in ("khat", "delta_p", "x"))
        surface = SampledSurface(axes=axes, values=np.zeros((2, 2, 2)))
        with pytest.raises(DeconvolutionError):
            deconvolution_service.deconvolve_t_3d(surface, KernelConfig(sigma=0.5))

    def test_exact_on_axes(self, qubit):
        axes = (
            GridAxis(name="khat", origin=101.0, step=1.0, count=1),
            GridAxis.centered("delta_p", 0.0, 1.0, 1.0),
            GridAxis.centered("delta_k", 0.0, 1.0, 1.0),
        )
        exact = deconvolution_service.exact_on_axes(waveguide_service.qubit_nonlinearity(qubit), axes)
        assert exact.shape == (1, 3, 3)
        assert exact[0, 0, 2] == pytest.approx(waveguide_service.tmono(102.0, 100.0, 100.0, 102.0, qubit))
