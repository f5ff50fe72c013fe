"""Special functions behind the closed-form downside deviation.

CONVENTION: ``inc_beta`` is the UNNORMALIZED incomplete beta function

    B_z(a, b) = integral_0^z t^(a-1) (1-t)^(b-1) dt

not the regularized I_z(a, b) that scipy returns. The two differ by the
complete beta factor B(a, b); mixing them up silently scales the closed form.

All functions are pure.
"""

import math

import numpy as np
from scipy.special import betainc, betaln, xlog1py, xlogy

from kellysortino.validation import (
    validate_binomial_index,
    validate_inc_beta_args,
    validate_probability,
)


def log_binomial(T: int, x: int) -> float:
    """ln C(T, x), via -ln(T+1) - ln B(x+1, T-x+1)."""
    validate_binomial_index(T, x)
    if x == 0 or x == T:
        return 0.0
    return float(-math.log(T + 1) - betaln(x + 1, T - x + 1))


def log_binomial_pmf(T: int, p: float) -> np.ndarray:
    """ln[C(T,w) p^w (1-p)^(T-w)] for w = 0..T (``-inf`` where the mass is zero)."""
    w = np.arange(T + 1, dtype=float)
    log_comb = -np.log(T + 1.0) - betaln(w + 1.0, T - w + 1.0)
    log_comb[0] = 0.0
    log_comb[-1] = 0.0
    return log_comb + xlogy(w, p) + xlog1py(T - w, -p)


def binomial_pmf(T: int, p: float) -> np.ndarray:
    """Binomial PMF over w = 0..T, each term exponentiated from log space."""
    return np.exp(log_binomial_pmf(T, p))


def inc_beta(z: float, a: float, b: float) -> float:
    """Unnormalized incomplete beta B_z(a, b).

    Evaluated as the regularized continued-fraction value I_z(a, b) times the
    complete beta factor B(a, b).
    """
    z, a, b = validate_inc_beta_args(z, a, b)
    if z == 0.0:
        return 0.0
    return float(betainc(a, b, z) * math.exp(betaln(a, b)))


def log_inc_beta_prefactor(T: int, alpha: int) -> float:
    """ln[T! / (alpha! (T-alpha-1)!)] = ln[(T-alpha) C(T, alpha)]."""
    return math.log(T - alpha) + log_binomial(T, alpha)


def binom_cdf(T: int, alpha: int, p: float) -> float:
    """sum_{x=0}^{alpha} C(T,x) p^x (1-p)^(T-x) through the incomplete beta identity.

    Uses sum_{x<=alpha} pmf = [T!/(alpha!(T-alpha-1)!)] B_{1-p}(T-alpha, alpha+1),
    the complement form of 1 - [...] B_p(alpha+1, T-alpha).
    """
    validate_binomial_index(T, alpha)
    p = validate_probability(p)
    if alpha == T or p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    # Regularized form directly: the prefactor times B(T-alpha, alpha+1) is 1.
    return float(betainc(T - alpha, alpha + 1, 1.0 - p))


def binom_cdf_direct(T: int, alpha: int, p: float) -> float:
    """Brute-force log-space summation of the binomial PMF up to alpha."""
    validate_binomial_index(T, alpha)
    p = validate_probability(p)
    return float(binomial_pmf(T, p)[: alpha + 1].sum())
