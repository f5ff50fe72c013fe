"""Tests for the special functions behind the closed form."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import beta, betainc

from kellysortino.errors import DomainError
from kellysortino.services.specfun import (
    binom_cdf,
    binom_cdf_direct,
    binomial_pmf,
    inc_beta,
    log_binomial,
    log_inc_beta_prefactor,
)


class TestLogBinomial:
    def test_small_value(self):
        assert log_binomial(10, 3) == pytest.approx(math.log(120), rel=1e-13)

    def test_boundaries_are_exact_zero(self):
        assert log_binomial(0, 0) == 0.0
        assert log_binomial(57, 0) == 0.0
        assert log_binomial(57, 57) == 0.0

    def test_large_horizon(self):
        expected = math.lgamma(1001) - 2 * math.lgamma(501)
        assert log_binomial(1000, 500) == pytest.approx(expected, rel=1e-12)

    def test_index_out_of_range(self):
        with pytest.raises(DomainError):
            log_binomial(10, 11)


class TestBinomialPmf:
    def test_matches_exact_terms(self):
        pmf = binomial_pmf(20, 0.3)
        for w in range(21):
            exact = math.comb(20, w) * 0.3**w * 0.7 ** (20 - w)
            assert pmf[w] == pytest.approx(exact, rel=1e-12)

    def test_sums_to_one(self):
        assert binomial_pmf(500, 0.61).sum() == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_probabilities(self):
        np.testing.assert_array_equal(binomial_pmf(4, 0.0), [1.0, 0.0, 0.0, 0.0, 0.0])
        np.testing.assert_array_equal(binomial_pmf(4, 1.0), [0.0, 0.0, 0.0, 0.0, 1.0])


class TestIncompleteBeta:
    def test_uniform_kernel(self):
        assert inc_beta(0.3, 1.0, 1.0) == pytest.approx(0.3, rel=1e-14)

    def test_complete_value(self):
        assert inc_beta(1.0, 2.0, 3.0) == pytest.approx(1.0 / 12.0, rel=1e-13)

    def test_is_unnormalized(self):
        regularized = betainc(2.0, 3.0, 0.5)
        assert inc_beta(0.5, 2.0, 3.0) == pytest.approx(regularized * beta(2.0, 3.0), rel=1e-13)
        assert inc_beta(0.5, 2.0, 3.0) != pytest.approx(regularized, rel=1e-3)

    def test_zero_argument(self):
        assert inc_beta(0.0, 0.5, 4.0) == 0.0

    def test_matches_quadrature(self):
        expected, _ = quad(lambda t: t**1.5 * (1 - t) ** 2.5, 0.0, 0.4)
        assert inc_beta(0.4, 2.5, 3.5) == pytest.approx(expected, rel=1e-9)

    def test_rejects_bad_arguments(self):
        with pytest.raises(DomainError):
            inc_beta(-0.1, 1.0, 1.0)
        with pytest.raises(DomainError):
            inc_beta(0.5, 1.0, -2.0)


class TestBinomialCdf:
    @pytest.mark.parametrize("T,alpha,p", [(10, 3, 0.4), (1, 0, 0.2), (60, 30, 0.55), (45, 44, 0.97)])
    def test_matches_direct_sum(self, T, alpha, p):
        assert binom_cdf(T, alpha, p) == pytest.approx(binom_cdf_direct(T, alpha, p), abs=1e-13)

    def test_exact_rational_value(self):
        expected = sum(math.comb(10, x) * 0.4**x * 0.6 ** (10 - x) for x in range(4))
        assert binom_cdf(10, 3, 0.4) == pytest.approx(expected, rel=1e-12)

    def test_edges(self):
        assert binom_cdf(12, 12, 0.3) == 1.0
        assert binom_cdf(12, 5, 0.0) == 1.0
        assert binom_cdf(12, 5, 1.0) == 0.0

    def test_prefactor(self):
        # 10! / (3! 6!) = 840
        assert log_inc_beta_prefactor(10, 3) == pytest.approx(math.log(840), rel=1e-13)
