import logging
from fractions import Fraction

import pytest

from scattomo.exceptions import ExtrapolationError
from scattomo.schemas.extrapolation_schemas import PowerLadder
from scattomo.schemas.protocol_schemas import Estimate, PlanKind, SectorTarget
from scattomo.services import extrapolation_service, protocol_service

PAIR = SectorTarget(p_modes=(0, 1), k_modes=(0, 1))


class TestWeights:
    """Combination weights and their identities."""

    def test_second_order_weights_for_small_factor(self):
        vector = extrapolation_service.weights(2, 1.05)
        assert vector.fractions() == [Fraction(21), Fraction(-20)]
        assert vector.weights == pytest.approx((21.0, -20.0))

    def test_first_order_is_trivial(self):
        assert extrapolation_service.weights(1, 2.0).weights == (1.0,)

    @pytest.mark.parametrize("b", [1.05, 1.2, 2.0])
    @pytest.mark.parametrize("Z", [1, 2, 3, 5, 8, 12])
    def test_weight_identities(self, Z, b):
        """sum_q w_q = 1 and sum_q w_q b^{(q-1)k} = 0 for k = 1..Z-1, exactly and in floats."""
        vector = extrapolation_service.weights(Z, b)
        exact = vector.fractions()
        factor = Fraction(repr(b))
        assert sum(exact) == 1
        for k in range(1, Z):
            assert sum(w * factor ** (q * k) for q, w in enumerate(exact)) == 0
        scale = vector.condition_number
        assert abs(sum(vector.weights) - 1.0) <= 1e-9 * max(scale, 1.0)
        for k in range(1, Z):
            residual = sum(w * b ** (q * k) for q, w in enumerate(vector.weights))
            assert abs(residual) <= 1e-9 * scale * b ** ((Z - 1) * k)

    def test_invalid_factor(self):
        with pytest.raises(ExtrapolationError):
            extrapolation_service.weights(3, 1.0)

    def test_ill_conditioned_weights_warn(self, caplog):
        with caplog.at_level(logging.WARNING):
            extrapolation_service.weights(12, 1.05)
        assert "condition number" in caplog.text


class TestCombine:
    """Weighted sums of estimates along a ladder."""

    def test_combination_removes_linear_term(self):
        """E(x) = S + c x is recovered exactly at Z = 2."""
        ladder = PowerLadder(base_power=0.01, factor=2.0, Z=2)
        values = [0.5 + 3.0 * x for x in ladder.powers]
        assert extrapolation_service.combine_values(values, ladder) == pytest.approx(0.5, abs=1e-14)

    def test_combination_removes_polynomial_terms(self):
        ladder = PowerLadder(base_power=0.02, factor=1.2, Z=4)
        values = [(1 - 2j) + 0.3 * x - 1.1j * x**2 + 2.0 * x**3 for x in ladder.powers]
        assert extrapolation_service.combine_values(values, ladder) == pytest.approx(1 - 2j, abs=1e-10)

    def test_combine_checks_powers(self):
        ladder = PowerLadder(base_power=0.01, factor=2.0, Z=2)
        estimates = [
            Estimate(
                target=PAIR, value=complex(1.0), power=x, N=2, first_order_bound=0.1, bound_kind="strict", protocol="elastic"
            )
            for x in (0.01, 0.03)
        ]
        with pytest.raises(ExtrapolationError):
            extrapolation_service.combine(estimates, ladder)

    def test_combine_checks_count(self):
        with pytest.raises(ExtrapolationError):
            extrapolation_service.combine_values([1.0], PowerLadder(base_power=0.01, factor=2.0, Z=2))

    def test_cancellation_warning(self, caplog):
        """A tiny result built from large weighted terms is reported."""
        ladder = PowerLadder(base_power=0.01, factor=1.05, Z=3)
        values = [1e-12 + x for x in ladder.powers]
        with caplog.at_level(logging.WARNING):
            extrapolation_service.combine_values(values, ladder)
        assert "cancellation" in caplog.text


class TestBounds:
    """Z-order error bounds."""

    def test_first_order_bound_is_recovered_at_z1(self):
        assert extrapolation_service.z_order_bound(2, 2, 0.01, 2.0, 1) == pytest.approx(
            protocol_service.first_order_bound(2, 2, 0.01), rel=1e-12
        )

    def test_bound_at_unit_power_and_tenth_order(self):
        """b = 1.05, Z = 10, |alpha|^2 = 1 gives a bound of order 1e-4."""
        bound = extrapolation_service.z_order_bound(2, 2, 1.0, 1.05, 10)
        assert 3e-5 <= bound <= 3e-4

    def test_bounds_decrease_until_optimum(self):
        Z_best = extrapolation_service.optimal_order(2, 2, 1.0, 1.05, 12)
        bounds = [extrapolation_service.z_order_bound(2, 2, 1.0, 1.05, Z) for Z in range(1, Z_best + 1)]
        assert bounds == sorted(bounds, reverse=True)

    def test_higher_orders_grow_past_the_optimum_at_high_power(self):
        Z_best = extrapolation_service.optimal_order(2, 2, 10.0, 1.05, 12)
        assert Z_best < 12
        assert extrapolation_service.z_order_bound(2, 2, 10.0, 1.05, 12) > extrapolation_service.z_order_bound(
            2, 2, 10.0, 1.05, Z_best
        )

    def test_bound_grid_is_power_major(self):
        rows = extrapolation_service.bound_grid(2, 2, (0.1, 1.0), 1.05, (1, 2, 3))
        assert [(r.alpha2, r.Z) for r in rows] == [(0.1, 1), (0.1, 2), (0.1, 3), (1.0, 1), (1.0, 2), (1.0, 3)]

    def test_zero_power(self):
        assert extrapolation_service.z_order_bound(2, 2, 0.0, 2.0, 3) == 0.0

    def test_invalid_parameters(self):
        with pytest.raises(ExtrapolationError):
            extrapolation_service.z_order_bound(2, 2, 0.1, 0.9, 3)


class TestLadders:
    """Z-order estimates from simulated records."""

    def test_second_order_beats_first_order(self, elastic_oracle_n8):
        ladder = PowerLadder(base_power=0.01, factor=2.0, Z=2)
        result = extrapolation_service.estimate_ladder(
            elastic_oracle_n8, PlanKind.ELASTIC, (0, 1), PAIR, ladder, (0, 1), 2
        )
        assert len(result.estimates) == 2
        assert result.error < result.first_order_error / 10
        assert result.error <= result.bound

    def test_empirical_orders(self, elastic_oracle_n8):
        """The Z-order error falls as |alpha|^{2Z}."""
        fits = extrapolation_service.empirical_order_study(elastic_oracle_n8, PAIR, (0, 1), 2)
        assert [fit.Z for fit in fits] == [1, 2, 3]
        for fit in fits:
            assert fit.points >= 4
            assert fit.slope == pytest.approx(fit.Z, rel=0.2)
            assert fit.within_tolerance
