"""Tests for the downside deviation, Sortino ratio and theta optimizer."""

import math

import numpy as np
import pytest
from kellysortino.config import settings
from kellysortino.errors import ConsistencyError, DegenerateAllocationError, DomainError
from kellysortino.services import sortino
from kellysortino.services.kellymath import AllocationParams, growth_rate, growth_variance
from kellysortino.services.sortino import (
    CLOSED_FORM,
    DIRECT_SUM,
    PAPER_FIDELITY,
    TARGET_AWARE,
    downside_deviation,
    downside_threshold,
    omega_coefficients,
    optimize_theta,
    sign_sum_cutoff,
    sortino_crossing,
    sortino_ratio,
    sweep,
    sweep_range,
    theta_grid,
    weighted_sum_closed,
    weighted_sum_direct,
)

PARAMS = AllocationParams(p=0.6, T=90, mu=0.02, theta=0.2)


def brute_force_sum(A, B, alpha, T, p):
    return sum((A + B * x) ** 2 * math.comb(T, x) * p**x * (1 - p) ** (T - x) for x in range(alpha + 1))


class TestWeightedSums:
    def test_direct_matches_brute_force(self):
        assert weighted_sum_direct(0.3, -0.1, 4, 10, 0.35) == pytest.approx(
            brute_force_sum(0.3, -0.1, 4, 10, 0.35), rel=1e-12
        )

    @pytest.mark.parametrize(
        "A,B,alpha,T,p",
        [
            (0.5, 0.2, 3, 10, 0.4),
            (-1.0, 0.3, 7, 20, 0.6),
            (1.5, -0.05, 0, 5, 0.5),
            (0.2, 0.1, 49, 50, 0.9),
            (-0.22, 0.0045, 53, 90, 0.6),
        ],
    )
    def test_closed_form_matches_direct(self, A, B, alpha, T, p):
        assert weighted_sum_closed(A, B, alpha, T, p) == pytest.approx(
            weighted_sum_direct(A, B, alpha, T, p), rel=1e-9
        )

    def test_full_range_is_second_moment(self):
        A, B, T, p = 0.4, -0.3, 12, 0.35
        expected = A**2 + 2 * A * B * p * T + B**2 * (T * p * (1 - p) + (T * p) ** 2)
        assert weighted_sum_closed(A, B, T, T, p) == pytest.approx(expected, rel=1e-13)
        assert weighted_sum_direct(A, B, T, T, p) == pytest.approx(expected, rel=1e-12)

    def test_empty_range(self):
        assert weighted_sum_direct(1.0, 1.0, -1, 10, 0.5) == 0.0
        assert weighted_sum_closed(1.0, 1.0, -1, 10, 0.5) == 0.0

    def test_closed_form_needs_interior_probability(self):
        with pytest.raises(DomainError):
            weighted_sum_closed(1.0, 1.0, 3, 10, 0.0)

    def test_alpha_beyond_horizon(self):
        with pytest.raises(DomainError):
            weighted_sum_direct(1.0, 1.0, 11, 10, 0.5)

    def test_hand_evaluated_coefficients(self):
        coeffs = omega_coefficients(0.0, 1.0, 1, 0.5)
        assert (coeffs.a, coeffs.b, coeffs.c) == pytest.approx((0.0625, 0.25, 0.5), rel=1e-15)

    def test_constant_weight_coefficients(self):
        coeffs = omega_coefficients(0.7, 0.0, 15, 0.3)
        assert coeffs.a == 0.0
        assert coeffs.b == 0.0
        assert coeffs.c == pytest.approx(0.49)


class TestClosedFormCrossCheck:
    def test_agreeing_evaluation_passes(self, monkeypatch):
        monkeypatch.setattr(settings, "verify_closed_form", True)
        assert weighted_sum_closed(0.5, 0.2, 3, 10, 0.4) > 0.0

    def test_disagreement_raises(self, monkeypatch):
        monkeypatch.setattr(settings, "verify_closed_form", True)
        monkeypatch.setattr(sortino, "closed_form_terms", lambda *args: (1.0, 0.0))
        with pytest.raises(ConsistencyError) as exc:
            weighted_sum_closed(0.5, 0.2, 3, 10, 0.4)
        assert exc.value.closed == 1.0


class TestThresholds:
    def test_target_cutoff(self):
        threshold = downside_threshold(PARAMS)
        assert threshold.w_max == 53
        assert threshold.t_max_real == pytest.approx(17.94, abs=0.01)

    def test_cutoff_brackets_target(self):
        w_max = downside_threshold(PARAMS).w_max
        spread = math.log(1.5)
        assert math.log(0.8) + w_max / 90 * spread < 0.02
        assert math.log(0.8) + (w_max + 1) / 90 * spread >= 0.02

    def test_zero_allocation_is_degenerate(self):
        with pytest.raises(DegenerateAllocationError):
            downside_threshold(AllocationParams(p=0.6, T=90, mu=0.02, theta=0.0))

    def test_sign_sum_cutoff_is_strict(self):
        assert sign_sum_cutoff(17.94) == 17
        assert sign_sum_cutoff(18.0) == 17
        assert sign_sum_cutoff(-3.2) == -1

    def test_unreachable_target_sums_everything(self):
        params = AllocationParams(p=0.6, T=10, mu=1.0, theta=0.2)
        assert downside_threshold(params).w_max == 10

    def test_negative_target_sums_nothing(self):
        params = AllocationParams(p=0.6, T=10, mu=-1.0, theta=0.2)
        assert downside_threshold(params).w_max == -1


class TestDownsideDeviation:
    @pytest.mark.parametrize("mode", [TARGET_AWARE, PAPER_FIDELITY])
    def test_paths_agree(self, mode):
        direct = downside_deviation(PARAMS, mode=mode, path=DIRECT_SUM)
        closed = downside_deviation(PARAMS, mode=mode, path=CLOSED_FORM)
        assert closed.D == pytest.approx(direct.D, rel=1e-9)
        assert closed.alpha == direct.alpha

    def test_target_aware_is_shortfall_semideviation(self):
        theta, T, mu, p = 0.2, 90, 0.02, 0.6
        total = 0.0
        for w in range(T + 1):
            g = math.log(1 - theta) + w / T * math.log((1 + theta) / (1 - theta))
            if g < mu:
                total += (g - mu) ** 2 * math.comb(T, w) * p**w * (1 - p) ** (T - w)
        assert downside_deviation(PARAMS, mode=TARGET_AWARE).D == pytest.approx(math.sqrt(total), rel=1e-10)

    def test_fidelity_mode_uses_sum_of_signs_cutoff(self):
        assert downside_deviation(PARAMS, mode=PAPER_FIDELITY).alpha == 17

    def test_literal_denominator_saturates_above_top_growth(self):
        ceiling = math.log(1.2)
        low = AllocationParams(p=0.6, T=90, mu=ceiling + 0.01, theta=0.2)
        high = AllocationParams(p=0.6, T=90, mu=ceiling + 0.5, theta=0.2)
        assert downside_deviation(low, mode=PAPER_FIDELITY).D == downside_deviation(high, mode=PAPER_FIDELITY).D

    @pytest.mark.parametrize("path", [DIRECT_SUM, CLOSED_FORM])
    def test_full_support_is_variance_plus_shortfall(self, path):
        params = AllocationParams(p=0.6, T=90, mu=0.5, theta=0.2)
        result = downside_deviation(params, mode=TARGET_AWARE, path=path)
        assert result.alpha == 90
        expected = growth_variance(0.6, 0.2, 90) + (growth_rate(0.6, 0.2) - 0.5) ** 2
        assert result.D**2 == pytest.approx(expected, rel=1e-10)

    def test_target_aware_shrinks_as_target_drops(self):
        mus = [0.08, 0.05, 0.02, 0.01, 0.0, -0.02, -0.05, -0.3]
        values = [downside_deviation(AllocationParams(p=0.6, T=90, mu=mu, theta=0.2), mode=TARGET_AWARE).D for mu in mus]
        for prev, cur in zip(values, values[1:]):
            assert cur <= prev
        assert values[-1] == 0.0


class TestSortinoRatio:
    def test_ratio(self):
        result = sortino_ratio(PARAMS, mode=TARGET_AWARE)
        excess = growth_rate(0.6, 0.2) - 0.02
        assert result.numerator == pytest.approx(excess)
        assert result.phi == pytest.approx(excess / result.downside.D)
        assert result.infinite is False

    def test_no_bet_limit_positive_target(self):
        result = sortino_ratio(AllocationParams(p=0.6, T=90, mu=0.02, theta=0.0))
        assert result.phi == -1.0
        assert result.downside.D == pytest.approx(0.02)

    def test_no_bet_limit_negative_target(self):
        result = sortino_ratio(AllocationParams(p=0.6, T=90, mu=-0.02, theta=0.0))
        assert result.phi == math.inf
        assert result.infinite is True

    def test_no_bet_limit_zero_target(self):
        assert sortino_ratio(AllocationParams(p=0.6, T=90, mu=0.0, theta=0.0)).phi == 0.0

    def test_no_downside_is_infinite(self):
        params = AllocationParams(p=0.6, T=10, mu=-1.0, theta=0.2)
        assert sortino_ratio(params, mode=TARGET_AWARE).phi == math.inf


class TestOptimizer:
    def test_grid(self):
        np.testing.assert_allclose(theta_grid(0.25, 1e-6), [0.0, 0.25, 0.5, 0.75])

    def test_fair_coin_does_not_bet(self):
        result = optimize_theta(0.5, 90, 0.02)
        assert result.theta_star == 0.0
        assert result.no_bet is True
        assert result.phi_star == -1.0

    def test_no_bet_outranks_marginal_small_bet(self):
        small = sortino_ratio(AllocationParams(p=0.5, T=90, mu=0.02, theta=0.001), mode=TARGET_AWARE)
        assert -1.0 < small.phi < -0.9999
        result = optimize_theta(0.5, 90, 0.02, mode=TARGET_AWARE)
        assert result.no_bet is True
        assert result.phi_star == -1.0

    def test_strong_edge_beats_two(self):
        result = optimize_theta(0.9, 90, 0.02, mode=TARGET_AWARE)
        assert result.no_bet is False
        assert result.phi_star > 2.0

    def test_grid_value_matches_scalar_evaluation(self):
        result = optimize_theta(0.7, 90, 0.02, mode=TARGET_AWARE)
        scalar = sortino_ratio(AllocationParams(p=0.7, T=90, mu=0.02, theta=result.theta_star), mode=TARGET_AWARE)
        assert result.phi_star == pytest.approx(scalar.phi, rel=1e-9)

    def test_staircase_cell_contains_optimum(self):
        result = optimize_theta(0.7, 90, 0.02, mode=PAPER_FIDELITY)
        lo, hi = result.staircase_cell
        assert lo <= result.theta_star <= hi

    def test_optimum_dominates_neighbours(self):
        result = optimize_theta(0.65, 50, 0.01, grid_step=1e-3)
        for theta in (result.theta_star - 0.05, result.theta_star + 0.05):
            params = AllocationParams(p=0.65, T=50, mu=0.01, theta=theta)
            assert sortino_ratio(params).phi <= result.phi_star + 1e-12

    @pytest.mark.parametrize("p", [0.65, 0.72, 0.8, 0.9])
    def test_halving_grid_step_is_stable(self, p):
        coarse = optimize_theta(p, 90, 0.02, mode=TARGET_AWARE, grid_step=5e-4)
        fine = optimize_theta(p, 90, 0.02, mode=TARGET_AWARE, grid_step=2.5e-4)
        assert abs(fine.phi_star - coarse.phi_star) <= 1e-3 * abs(fine.phi_star)

    def test_target_aware_optimum_ignores_accuracy(self):
        a = optimize_theta(0.7, 90, 0.02, mode=TARGET_AWARE)
        b = optimize_theta(0.8, 90, 0.02, mode=TARGET_AWARE)
        assert abs(a.theta_star - b.theta_star) <= a.grid_step

    def test_closed_form_path_reports_same_downside(self):
        direct = optimize_theta(0.7, 90, 0.02, path=DIRECT_SUM)
        closed = optimize_theta(0.7, 90, 0.02, path=CLOSED_FORM)
        assert closed.theta_star == direct.theta_star
        assert closed.downside.D == pytest.approx(direct.downside.D, rel=1e-9)


class TestSweeps:
    def test_single_point_matches_optimize(self):
        rows = sweep_range("p", 0.72, 0.72, 0.01, T=90, mu=0.02)
        assert len(rows) == 1
        assert rows[0].theta_star == optimize_theta(0.72, 90, 0.02).theta_star

    def test_rows_in_input_order(self):
        rows = sweep("mu", [0.03, 0.0, 0.01], T=90, p=0.72)
        assert [r.value for r in rows] == [0.03, 0.0, 0.01]

    def test_unknown_parameter(self):
        with pytest.raises(DomainError, match="Cannot sweep"):
            sweep("T", [10.0], T=90, p=0.6, mu=0.02)

    def test_missing_fixed_value(self):
        with pytest.raises(DomainError, match="needs a fixed mu"):
            sweep("p", [0.6], T=90)

    def test_parallel_matches_serial(self):
        values = [0.6, 0.7, 0.8]
        serial = sweep("p", values, T=90, mu=0.02)
        parallel = sweep("p", values, T=90, mu=0.02, workers=2)
        assert serial == parallel

    @pytest.mark.slow
    def test_monotone_in_accuracy(self):
        rows = sweep_range("p", 0.55, 0.95, 0.005, T=90, mu=0.02, mode=TARGET_AWARE)
        step = settings.grid_step
        for prev, cur in zip(rows, rows[1:]):
            assert cur.theta_star >= prev.theta_star - step
            assert cur.phi_star >= prev.phi_star

    @pytest.mark.slow
    def test_monotone_in_target(self):
        rows = sweep_range("mu", 0.0, 0.1, 0.002, T=90, p=0.72, mode=TARGET_AWARE)
        for prev, cur in zip(rows, rows[1:]):
            assert cur.phi_star <= prev.phi_star

    @pytest.mark.slow
    def test_sortino_two_crossing(self):
        p = sortino_crossing(90, 0.02, mode=TARGET_AWARE)
        assert p is not None
        assert optimize_theta(p, 90, 0.02, mode=TARGET_AWARE).phi_star >= 2.0
        assert optimize_theta(round(p - 1e-3, 12), 90, 0.02, mode=TARGET_AWARE).phi_star < 2.0
