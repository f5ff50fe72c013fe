"""Tests for the oracle battery."""

import math
from fractions import Fraction

import numpy as np
import pytest
from kellysortino.services.sortino import omega_coefficients
from kellysortino.services.specfun import binom_cdf, log_inc_beta_prefactor
from kellysortino.services.verification import (
    check_binom_cdf,
    check_closed_form_vs_direct,
    check_direct_vs_exact,
    check_growth_variance,
    check_inc_beta_analytic,
    check_inc_beta_quadrature,
    check_kelly_sharpe_crossing,
    check_omega_identity,
    check_sortino_two_crossing,
    exact_weighted_sum,
    inc_beta_quadrature,
    random_cases,
    richardson_derivatives,
    run_verification,
)

SEED = 20190828


def off_by_one_exponent(A, B, alpha, T, p):
    """Closed form with (1-p)^(T-alpha-1) in place of (1-p)^(T-alpha-2)."""
    coeffs = omega_coefficients(A, B, T, p)
    scale = math.exp(log_inc_beta_prefactor(T, alpha) + (alpha - 1) * math.log(p) + (T - alpha - 1) * math.log1p(-p))
    boundary = scale * (coeffs.a * (p * (T - 1) - alpha) + coeffs.b * (p - 1.0) * p)
    return boundary + coeffs.c * binom_cdf(T, alpha, p)


class TestRandomCases:
    def test_ranges(self):
        for case in random_cases(np.random.default_rng(1), 500):
            assert -2.0 <= case.A <= 2.0
            assert -2.0 <= case.B <= 2.0
            assert 1 <= case.T <= 50
            assert 0 <= case.alpha <= case.T - 1
            assert 0.05 <= case.p <= 0.95

    def test_reproducible(self):
        assert random_cases(np.random.default_rng(3), 5) == random_cases(np.random.default_rng(3), 5)


class TestClosedFormBattery:
    def test_quick_battery_passes(self):
        result = check_closed_form_vs_direct(100, SEED)
        assert result.passed, result.first_failure
        assert result.detail.startswith("100/100")

    @pytest.mark.slow
    def test_full_battery_passes(self):
        result = check_closed_form_vs_direct(1000, SEED)
        assert result.passed, result.first_failure
        assert result.total == 1000

    def test_injected_exponent_fault_is_caught(self):
        result = check_closed_form_vs_direct(10, SEED, closed=off_by_one_exponent)
        assert result.passed is False
        assert result.failures >= 1
        assert result.first_failure.startswith("A=")
        assert "alpha=" in result.first_failure


class TestExactOracle:
    def test_exact_sum_small_case(self):
        # (1 + x)^2 over Binomial(2, 1/2) up to x = 1: 1/4 + 4 * 1/2
        assert exact_weighted_sum(1.0, 1.0, 1, 2, 0.5) == Fraction(9, 4)

    def test_direct_matches_exact(self):
        result = check_direct_vs_exact(50, SEED)
        assert result.passed, result.first_failure


class TestOmegaIdentity:
    def test_richardson_on_polynomial(self):
        d1, d2 = richardson_derivatives(lambda p: p**3, 0.5, 1e-3)
        assert d1 == pytest.approx(0.75, rel=1e-9)
        assert d2 == pytest.approx(3.0, rel=1e-6)

    def test_identity_holds(self):
        result = check_omega_identity(30, SEED)
        assert result.passed, result.first_failure

    @pytest.mark.slow
    def test_identity_holds_full(self):
        result = check_omega_identity(100, SEED)
        assert result.passed, result.first_failure


class TestSpecialFunctionChecks:
    def test_analytic_values(self):
        result = check_inc_beta_analytic()
        assert result.passed, result.first_failure

    def test_quadrature_oracle(self):
        assert inc_beta_quadrature(0.3, 1.0, 1.0) == pytest.approx(0.3, rel=1e-10)
        result = check_inc_beta_quadrature(SEED)
        assert result.passed, result.first_failure
        assert result.total == 500
        assert result.detail == "500/500 within 1e-10"

    def test_binomial_cdf(self):
        result = check_binom_cdf()
        assert result.passed, result.first_failure
        # every alpha in 0..T for T = 1..60, at p = 0.1 .. 0.9
        assert result.total == 9 * sum(T + 1 for T in range(1, 61))


class TestAnchors:
    def test_kelly_sharpe_crossing(self):
        assert check_kelly_sharpe_crossing().passed

    def test_growth_variance(self):
        result = check_growth_variance(20_000, SEED, p=0.6, theta=0.2, T=50)
        assert result.passed, result.first_failure

    @pytest.mark.slow
    def test_growth_variance_full_size(self):
        result = check_growth_variance(100_000, SEED)
        assert result.passed, result.first_failure

    def test_growth_variance_default_horizon(self):
        result = check_growth_variance(2_000, SEED)
        assert "T=50" in result.detail

    @pytest.mark.slow
    def test_sortino_two_crossing_is_diagnostic(self):
        result = check_sortino_two_crossing()
        assert result.passed is True
        assert "paper_fidelity=" in result.detail
        assert "target_aware=" in result.detail


class TestRunVerification:
    def test_quick_run_passes(self):
        outcome = run_verification(trials=10, n_paths=5_000, include_crossing=False)
        assert outcome.passed
        assert [c.name for c in outcome.checks] == [
            "closed_form_vs_direct",
            "direct_vs_exact",
            "omega_identity",
            "inc_beta_analytic",
            "inc_beta_vs_quadrature",
            "binom_cdf_vs_direct",
            "kelly_sharpe_crossing",
            "growth_variance_monte_carlo",
        ]

    def test_injected_fault_fails_run(self):
        outcome = run_verification(trials=10, n_paths=5_000, include_crossing=False, closed=off_by_one_exponent)
        assert outcome.passed is False
