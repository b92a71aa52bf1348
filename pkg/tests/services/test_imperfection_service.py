import math

import pytest

from scattomo.exceptions import ImperfectionError
from scattomo.schemas.imperfection_schemas import Perturbation, PerturbationKind
from scattomo.schemas.protocol_schemas import SectorTarget
from scattomo.services import imperfection_service, protocol_service

PAIR = SectorTarget(p_modes=(0, 1), k_modes=(0, 1))
DELTAS = (0.0005, 0.001, 0.002, 0.005)


def elastic_plan(power=0.01):
    return protocol_service.build_input_plan_elastic(2, protocol_service.equal_magnitudes(2, power))


def general_plan(power=0.01):
    return protocol_service.build_input_plan_general(2, protocol_service.equal_magnitudes(2, power))


class TestPerturbPlan:
    """Prepared amplitudes under sign, power and phase deviations."""

    def test_no_perturbation_returns_plan(self):
        plan = elastic_plan()
        assert imperfection_service.perturb_plan(plan, []) is plan

    def test_sign_deviation_moves_second_mode_only(self):
        plan = elastic_plan()
        perturbed = imperfection_service.perturb_plan(plan, [Perturbation(kind=PerturbationKind.SIGN, magnitude=0.1)])
        magnitude = math.sqrt(0.005)
        assert perturbed.perturbed
        assert perturbed.magnitudes == plan.magnitudes
        for entry in perturbed.entries:
            assert entry.amplitudes[0] == pytest.approx(magnitude)
            assert entry.amplitudes[1] == pytest.approx((entry.s[1] + 0.1) * magnitude)

    def test_sign_branch_selects_entries(self):
        perturbation = Perturbation(kind=PerturbationKind.SIGN, magnitude=0.1, mode=1, branch=-1)
        perturbed = imperfection_service.perturb_plan(elastic_plan(), [perturbation])
        plus, minus = perturbed.entries
        magnitude = math.sqrt(0.005)
        assert plus.amplitudes[1] == pytest.approx(magnitude)
        assert minus.amplitudes[1] == pytest.approx(-0.9 * magnitude)

    def test_power_deviation_rescales_every_entry(self):
        perturbation = Perturbation(kind=PerturbationKind.POWER, magnitude=0.002, direction=-1)
        perturbed = imperfection_service.perturb_plan(general_plan(), [perturbation])
        for entry in perturbed.entries:
            assert sum(abs(a) ** 2 for a in entry.amplitudes) == pytest.approx(0.008)
        assert perturbed.power == pytest.approx(0.01)

    def test_power_cannot_vanish(self):
        perturbation = Perturbation(kind=PerturbationKind.POWER, magnitude=0.01, direction=-1)
        with pytest.raises(ImperfectionError):
            imperfection_service.perturb_plan(elastic_plan(), [perturbation])

    def test_phase_deviation_on_one_index(self):
        plan = general_plan()
        perturbation = Perturbation(kind=PerturbationKind.PHASE, magnitude=0.05, phase_index=2)
        perturbed = imperfection_service.perturb_plan(plan, [perturbation])
        for nominal, entry in zip(plan.entries, perturbed.entries):
            shift = 0.05 if entry.l == 2 else 0.0
            for a, b in zip(nominal.amplitudes, entry.amplitudes):
                assert b == pytest.approx(a * complex(math.cos(shift), math.sin(shift)))

    def test_selectors_out_of_range(self):
        with pytest.raises(ImperfectionError):
            imperfection_service.perturb_plan(
                general_plan(), [Perturbation(kind=PerturbationKind.PHASE, magnitude=0.1, phase_index=5)]
            )
        with pytest.raises(ImperfectionError):
            imperfection_service.perturb_plan(
                elastic_plan(), [Perturbation(kind=PerturbationKind.SIGN, magnitude=0.1, mode=2)]
            )

    def test_seeded_directions_are_reproducible(self):
        perturbation = Perturbation(kind=PerturbationKind.PHASE, magnitude=0.01, seed=4)
        first = imperfection_service.perturb_plan(general_plan(), [perturbation])
        second = imperfection_service.perturb_plan(general_plan(), [perturbation])
        assert first.entries == second.entries


class TestScalingStudies:
    """Excess error is linear in every preparation deviation."""

    def test_power_deviation(self, elastic_oracle):
        result = imperfection_service.scaling_study(
            elastic_oracle, PAIR, elastic_plan(), PerturbationKind.POWER, DELTAS, (0, 1), 2
        )
        assert not result.inconclusive
        assert result.fitted_exponent == pytest.approx(1.0, abs=0.05)
        assert result.within_tolerance

    def test_sign_deviation(self, elastic_oracle):
        result = imperfection_service.scaling_study(
            elastic_oracle, PAIR, elastic_plan(), PerturbationKind.SIGN, DELTAS, (0, 1), 2
        )
        assert result.within_tolerance
        assert [row.delta for row in result.rows] == list(DELTAS)

    def test_phase_deviation(self, general_oracle):
        result = imperfection_service.scaling_study(
            general_oracle, PAIR, general_plan(), PerturbationKind.PHASE, DELTAS, (0, 1), 2
        )
        assert result.within_tolerance

    @pytest.mark.parametrize("deltas", [(0.001, 0.002, 0.005), (0.001, 0.002, 0.003, 0.005)])
    def test_delta_list_must_span_a_decade(self, elastic_oracle, deltas):
        with pytest.raises(ImperfectionError):
            imperfection_service.scaling_study(
                elastic_oracle, PAIR, elastic_plan(), PerturbationKind.POWER, deltas, (0, 1), 2
            )


class TestPhasePowerLaw:
    def test_phase_error_falls_with_power(self, general_oracle):
        result = imperfection_service.phase_power_study(general_oracle, PAIR, (0.01, 0.04), 1e-3, (0, 1), 2)
        assert result.expected_ratio == pytest.approx(0.5)
        assert result.observed_ratio < 1.0
        assert result.within_tolerance

    def test_powers_must_increase(self, general_oracle):
        with pytest.raises(ImperfectionError):
            imperfection_service.phase_power_study(general_oracle, PAIR, (0.04, 0.01), 1e-3, (0, 1), 2)


def test_imperfection_suite(elastic_oracle, general_oracle):
    result = imperfection_service.imperfection_suite(
        elastic_oracle, general_oracle, PAIR, (0, 1), 2, 0.01, DELTAS, (0, 1), (0.01, 0.04), 1e-3
    )
    assert [study.kind for study in result.studies] == [
        PerturbationKind.SIGN,
        PerturbationKind.POWER,
        PerturbationKind.PHASE,
    ]
    assert all(study.fitted_exponent is not None for study in result.studies)
