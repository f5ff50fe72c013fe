"""Sortino ratio of the finite-horizon Kelly growth rate.

The realized growth rate is affine in the win count w ~ Binomial(T, p):

    G(w) = ln(1-theta) + (w/T) ln((1+theta)/(1-theta))

so every downside second moment is a truncated sum

    sum_{x=0}^{alpha} (A + B x)^2 C(T,x) p^x (1-p)^(T-x)

for some affine weight (A, B). The sum has a closed form: the differential
operator Omega = a d^2/dp^2 + b d/dp + c maps each binomial PMF term to the
same term times (A + B x)^2, so applying Omega to the cumulative binomial
(an incomplete beta function of 1-p) yields the truncated sum.

Two denominators are supported:

    target_aware    E[min(G - mu, 0)^2], mu inside the square, summed over win
                    counts with G(w) < mu.
    paper_fidelity  the literal published denominator: A = ln(1-theta^2)/2,
                    B = ln((1+theta)/(1-theta))/(2T), no mu in the square, and
                    the cutoff taken from the sum-of-signs threshold T_max.
"""

import functools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from kellysortino.config import settings
from kellysortino.errors import ConsistencyError, DegenerateAllocationError, DomainError
from kellysortino.metrics import (
    OPTIMIZER_DURATION,
    OPTIMIZER_RUNS_TOTAL,
    SORTINO_EVALUATIONS_TOTAL,
)
from kellysortino.services.kellymath import (
    AllocationParams,
    growth_rate,
    inclusive_grid,
    log_odds,
)
from kellysortino.services.specfun import (
    binom_cdf,
    binomial_pmf,
    log_inc_beta_prefactor,
)
from kellysortino.validation import (
    validate_downside_path,
    validate_horizon,
    validate_probability,
    validate_sortino_mode,
)

logger = logging.getLogger(__name__)

PAPER_FIDELITY = "paper_fidelity"
TARGET_AWARE = "target_aware"
DIRECT_SUM = "direct_sum"
CLOSED_FORM = "closed_form"

# Roundoff allowance, relative to the magnitude of the closed form's own terms
_CANCELLATION_ULPS = 256 * np.finfo(float).eps


@dataclass(frozen=True)
class AffineWeight:
    A: float
    B: float


@dataclass(frozen=True)
class OmegaCoefficients:
    a: float
    b: float
    c: float


@dataclass(frozen=True)
class DownsideThreshold:
    t_max_real: float
    w_max: int


@dataclass(frozen=True)
class DownsideResult:
    D: float
    alpha: int
    t_max_real: float
    path: str
    mode: str


@dataclass(frozen=True)
class SortinoResult:
    phi: float
    numerator: float
    downside: DownsideResult

    @property
    def infinite(self) -> bool:
        return math.isinf(self.phi)


@dataclass(frozen=True)
class OptimizationResult:
    theta_star: float
    phi_star: float
    grid_step: float
    evaluations: int
    staircase_cell: tuple[float, float]
    no_bet: bool
    mode: str
    downside: DownsideResult


@dataclass(frozen=True)
class SweepRow:
    value: float
    theta_star: float
    phi_star: float
    w_max: int
    D: float
    no_bet: bool


# ---------------------------------------------------------------------------
# Weighted binomial sums
# ---------------------------------------------------------------------------

def omega_coefficients(A: float, B: float, T: int, p: float) -> OmegaCoefficients:
    return OmegaCoefficients(
        a=B**2 * (p - 1.0) ** 2 * p**2,
        b=-B * (p - 1.0) * p * (2.0 * A + B * (2.0 * p * (T - 1) + 1.0)),
        c=A**2 + 2.0 * A * B * p * T + B**2 * p * T * (p * (T - 1) + 1.0),
    )


def _check_alpha(alpha: int, T: int) -> None:
    if alpha > T:
        raise DomainError(f"Cutoff alpha={alpha} exceeds horizon T={T}")


def weighted_sum_direct(A: float, B: float, alpha: int, T: int, p: float) -> float:
    """sum_{x=0}^{alpha} (A + B x)^2 pmf(x), pmf terms taken from log space."""
    validate_horizon(T)
    p = validate_probability(p)
    _check_alpha(alpha, T)
    if alpha < 0:
        return 0.0
    x = np.arange(alpha + 1, dtype=float)
    pmf = binomial_pmf(T, p)[: alpha + 1]
    return float(np.sum((A + B * x) ** 2 * pmf))


def closed_form_terms(A: float, B: float, alpha: int, T: int, p: float) -> tuple[float, float]:
    """(boundary term, c * cumulative term) of the closed form; their sum is the weighted sum.

    boundary = T!/(alpha!(T-alpha-1)!) p^(alpha-1) (1-p)^(T-alpha-2)
               * (a (p(T-1) - alpha) + b (p-1) p)
    cumulative = T!/(alpha!(T-alpha-1)!) B_{1-p}(T-alpha, alpha+1)
               = P[X <= alpha]
    """
    validate_horizon(T)
    p = validate_probability(p, open_interval=True)
    _check_alpha(alpha, T)
    if alpha < 0:
        return 0.0, 0.0
    coeffs = omega_coefficients(A, B, T, p)
    if alpha == T:
        # Omega applied to the total mass 1 leaves c, the full second moment.
        return 0.0, coeffs.c
    log_scale = (
        log_inc_beta_prefactor(T, alpha)
        + (alpha - 1) * math.log(p)
        + (T - alpha - 2) * math.log1p(-p)
    )
    boundary = math.exp(log_scale) * (
        coeffs.a * (p * (T - 1) - alpha) + coeffs.b * (p - 1.0) * p
    )
    return boundary, coeffs.c * binom_cdf(T, alpha, p)


def closed_form_agrees(closed: float, direct: float, terms: tuple[float, float], rtol: float) -> bool:
    """Relative agreement, with a roundoff floor set by the closed form's own terms.

    When the boundary and cumulative terms nearly cancel, the attainable
    accuracy is bounded by their magnitude rather than by the result's.
    """
    scale = abs(terms[0]) + abs(terms[1])
    return abs(closed - direct) <= rtol * abs(direct) + _CANCELLATION_ULPS * scale


def weighted_sum_closed(A: float, B: float, alpha: int, T: int, p: float) -> float:
    """Closed-form evaluation of ``weighted_sum_direct`` for 0 < p < 1."""
    terms = closed_form_terms(A, B, alpha, T, p)
    value = terms[0] + terms[1]
    if settings.verify_closed_form:
        direct = weighted_sum_direct(A, B, alpha, T, p)
        if not closed_form_agrees(value, direct, terms, settings.closed_form_rtol):
            raise ConsistencyError(
                f"Closed form {value!r} != direct sum {direct!r} "
                f"for A={A!r}, B={B!r}, alpha={alpha}, T={T}, p={p!r}",
                closed=value,
                direct=direct,
            )
    return value


# ---------------------------------------------------------------------------
# Thresholds and the downside deviation
# ---------------------------------------------------------------------------

def _require_positive_theta(theta: float) -> None:
    if theta == 0.0:
        raise DegenerateAllocationError("Downside threshold is undefined at theta = 0")
    if not 0.0 < theta < 1.0:
        raise DomainError(f"Downside threshold needs 0 < theta < 1: {theta}")


def literal_weight(params: AllocationParams) -> AffineWeight:
    theta = params.theta
    return AffineWeight(A=0.5 * math.log1p(-theta * theta), B=log_odds(theta) / (2.0 * params.T))


def target_weight(params: AllocationParams) -> AffineWeight:
    """(G(w) - mu) = A' + B' w."""
    return AffineWeight(A=math.log1p(-params.theta) - params.mu, B=log_odds(params.theta) / params.T)


def _strict_cutoff(t: float) -> int:
    """Largest integer strictly below t."""
    return int(math.ceil(t)) - 1


def downside_threshold(params: AllocationParams) -> DownsideThreshold:
    """Sum-of-signs threshold T_max and the win-count cutoff w_max.

    t_max_real = min(T, T (2 mu - ln(1-theta^2)) / ln((1+theta)/(1-theta)))
    w_max      = largest w in 0..T with G(w) < mu, or -1 if there is none.
    """
    T, mu, theta = params.T, params.mu, params.theta
    _require_positive_theta(theta)
    spread = log_odds(theta)
    t_max_real = min(float(T), T * (2.0 * mu - math.log1p(-theta * theta)) / spread)

    def g(w: int) -> float:
        return math.log1p(-theta) + (w / T) * spread

    breakeven = T * (mu - math.log1p(-theta)) / spread
    if breakeven > T:
        w_max = T
    elif breakeven <= 0.0:
        w_max = -1
    else:
        w_max = _strict_cutoff(breakeven)
    # Settle rounding at the boundary against the growth rate itself
    while w_max < T and g(w_max + 1) < mu:
        w_max += 1
    while w_max >= 0 and not g(w_max) < mu:
        w_max -= 1
    return DownsideThreshold(t_max_real=t_max_real, w_max=w_max)


def sign_sum_cutoff(t_max_real: float) -> int:
    """Summation limit for the literal denominator: floor, excluding an exact integer."""
    return max(_strict_cutoff(t_max_real), -1)


def downside_deviation(
    params: AllocationParams,
    mode: str | None = None,
    path: str | None = None,
) -> DownsideResult:
    mode = validate_sortino_mode(mode or settings.sortino_mode)
    path = validate_downside_path(path or settings.downside_path)
    threshold = downside_threshold(params)

    if mode == TARGET_AWARE:
        weight = target_weight(params)
        alpha = threshold.w_max
    else:
        weight = literal_weight(params)
        alpha = sign_sum_cutoff(threshold.t_max_real)

    if alpha < 0:
        second_moment = 0.0
    elif path == CLOSED_FORM:
        second_moment = weighted_sum_closed(weight.A, weight.B, alpha, params.T, params.p)
    else:
        second_moment = weighted_sum_direct(weight.A, weight.B, alpha, params.T, params.p)

    return DownsideResult(
        D=math.sqrt(max(second_moment, 0.0)),
        alpha=alpha,
        t_max_real=threshold.t_max_real,
        path=path,
        mode=mode,
    )


def _no_bet_limit(params: AllocationParams, mode: str, path: str) -> SortinoResult:
    """theta -> 0: every outcome is G = 0, so the shortfall is max(mu, 0)."""
    mu = params.mu
    if mu > 0.0:
        downside = DownsideResult(D=mu, alpha=params.T, t_max_real=math.inf, path=path, mode=mode)
        return SortinoResult(phi=-1.0, numerator=-mu, downside=downside)
    downside = DownsideResult(D=0.0, alpha=-1, t_max_real=-math.inf, path=path, mode=mode)
    return SortinoResult(phi=math.inf if mu < 0.0 else 0.0, numerator=-mu, downside=downside)


def _ratio(numerator: float, D: float, mode: str) -> float:
    if D > 0.0:
        return numerator / D
    if numerator > 0.0:
        return math.inf
    if mode == TARGET_AWARE:
        # No outcome below mu means the mean cannot be below mu either.
        assert numerator >= -1e-12, f"Zero downside with negative excess return {numerator}"
        return 0.0
    return -math.inf if numerator < 0.0 else 0.0


def sortino_ratio(
    params: AllocationParams,
    mode: str | None = None,
    path: str | None = None,
) -> SortinoResult:
    mode = validate_sortino_mode(mode or settings.sortino_mode)
    path = validate_downside_path(path or settings.downside_path)
    SORTINO_EVALUATIONS_TOTAL.labels(mode=mode, path=path).inc()
    if params.theta == 0.0:
        return _no_bet_limit(params, mode, path)
    numerator = growth_rate(params.p, params.theta) - params.mu
    downside = downside_deviation(params, mode, path)
    return SortinoResult(phi=_ratio(numerator, downside.D, mode), numerator=numerator, downside=downside)


# ---------------------------------------------------------------------------
# Optimization over theta
# ---------------------------------------------------------------------------

def theta_grid(step: float, upper_guard: float) -> np.ndarray:
    if not step > 0.0:
        raise DomainError(f"Grid step must be positive: {step}")
    n = int(math.floor((1.0 - upper_guard) / step + 1e-9))
    grid = step * np.arange(n + 1, dtype=float)
    return grid[grid <= 1.0 - upper_guard]


def _grid_phi(p: float, T: int, mu: float, thetas: np.ndarray, mode: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized direct-sum Sortino ratio, excess return and cutoff for positive thetas."""
    pmf = binomial_pmf(T, p)
    w = np.arange(T + 1, dtype=float)
    lo = np.log1p(-thetas)
    spread = np.log1p(thetas) - lo
    excess = p * np.log1p(thetas) + (1.0 - p) * lo - mu

    if mode == TARGET_AWARE:
        shortfall = lo[:, None] + (w[None, :] / T) * spread[:, None] - mu
        below = shortfall < 0.0
        second_moment = np.where(below, shortfall**2, 0.0) @ pmf
        # G(w) is increasing in w, so the rows of `below` are prefixes
        cutoff = below.sum(axis=1) - 1
    else:
        log_sq = np.log1p(-thetas * thetas)
        t_max = np.minimum(float(T), T * (2.0 * mu - log_sq) / spread)
        cutoff = np.maximum(np.ceil(t_max).astype(int) - 1, -1)
        weight = 0.5 * log_sq[:, None] + (spread / (2.0 * T))[:, None] * w[None, :]
        second_moment = np.where(w[None, :] <= cutoff[:, None], weight**2, 0.0) @ pmf

    D = np.sqrt(second_moment)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(D > 0.0, excess / D, np.where(excess > 0.0, np.inf, np.where(excess < 0.0, -np.inf, 0.0)))
    if mode == TARGET_AWARE:
        phi = np.where((D == 0.0) & (excess <= 0.0), 0.0, phi)
    return phi, excess, cutoff


def _staircase_cell(thetas: np.ndarray, cutoff: np.ndarray, i: int) -> tuple[float, float]:
    lo = hi = i
    while lo > 0 and cutoff[lo - 1] == cutoff[i]:
        lo -= 1
    while hi < len(cutoff) - 1 and cutoff[hi + 1] == cutoff[i]:
        hi += 1
    return float(thetas[lo]), float(thetas[hi])


def optimize_theta(
    p: float,
    T: int,
    mu: float,
    mode: str | None = None,
    grid_step: float | None = None,
    path: str | None = None,
) -> OptimizationResult:
    """Exhaustive grid search for the Sortino-optimal allocation.

    The denominator is piecewise in theta through the win-count cutoff, so the
    objective is searched on a uniform grid rather than by derivatives. Ties
    go to the smallest theta. When no positive theta beats mu on expected
    growth, the no-bet allocation theta = 0 is returned.
    """
    p = validate_probability(p)
    validate_horizon(T)
    mode = validate_sortino_mode(mode or settings.sortino_mode)
    path = validate_downside_path(path or settings.downside_path)
    step = grid_step or settings.grid_step

    started = time.perf_counter()
    thetas = theta_grid(step, settings.theta_upper_guard)

    limit = _no_bet_limit(AllocationParams(p=p, T=T, mu=mu, theta=0.0), mode, path)
    phi_pos, excess, cutoff_pos = _grid_phi(p, T, mu, thetas[1:], mode)
    phi = np.concatenate(([limit.phi], phi_pos))
    cutoff = np.concatenate(([limit.downside.alpha], cutoff_pos))

    no_bet = not bool(np.any(excess > 0.0))
    best = 0 if no_bet else int(np.argmax(phi))
    theta_star = float(thetas[best])

    if best == 0:
        downside = limit.downside
    else:
        downside = downside_deviation(AllocationParams(p=p, T=T, mu=mu, theta=theta_star), mode, path)

    result = OptimizationResult(
        theta_star=theta_star,
        phi_star=float(phi[best]),
        grid_step=step,
        evaluations=len(thetas),
        staircase_cell=_staircase_cell(thetas, cutoff, best),
        no_bet=no_bet,
        mode=mode,
        downside=downside,
    )

    elapsed = time.perf_counter() - started
    OPTIMIZER_DURATION.observe(elapsed)
    OPTIMIZER_RUNS_TOTAL.labels(mode=mode, no_bet=str(no_bet).lower()).inc()
    if no_bet:
        logger.warning(
            "No allocation beats the desired rate; not betting",
            extra={"event": "optimize", "p": p, "T": T, "mu": mu, "mode": mode},
        )
    logger.debug(
        "Optimized allocation",
        extra={
            "event": "optimize",
            "p": p, "T": T, "mu": mu, "mode": mode,
            "theta_star": theta_star, "phi_star": result.phi_star,
            "elapsed_s": round(elapsed, 6),
        },
    )
    return result


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

SWEEPABLE = {"p", "mu"}


def _sweep_point(value: float, param: str, p: float, T: int, mu: float, mode: str, grid_step: float, path: str) -> SweepRow:
    point = {"p": p, "mu": mu, param: value}
    result = optimize_theta(point["p"], T, point["mu"], mode=mode, grid_step=grid_step, path=path)
    return SweepRow(
        value=value,
        theta_star=result.theta_star,
        phi_star=result.phi_star,
        w_max=result.downside.alpha,
        D=result.downside.D,
        no_bet=result.no_bet,
    )


def sweep(
    param: str,
    values: list[float],
    *,
    T: int,
    p: float | None = None,
    mu: float | None = None,
    mode: str | None = None,
    grid_step: float | None = None,
    path: str | None = None,
    workers: int = 1,
) -> list[SweepRow]:
    """optimize_theta over a list of p or mu values, returned in input order."""
    if param not in SWEEPABLE:
        raise DomainError(f"Cannot sweep {param!r}; choose one of {', '.join(sorted(SWEEPABLE))}")
    fixed = {"p": p, "mu": mu}
    other = "mu" if param == "p" else "p"
    if fixed[other] is None:
        raise DomainError(f"Sweeping {param} needs a fixed {other}")
    if not values:
        raise DomainError("Sweep needs at least one value")

    point = functools.partial(
        _sweep_point,
        param=param,
        p=p if p is not None else 0.5,
        T=T,
        mu=mu if mu is not None else 0.0,
        mode=validate_sortino_mode(mode or settings.sortino_mode),
        grid_step=grid_step or settings.grid_step,
        path=validate_downside_path(path or settings.downside_path),
    )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(point, values))
    else:
        rows = [point(v) for v in values]

    logger.info(
        "Sweep complete",
        extra={"event": "sweep", "param": param, "points": len(rows), "T": T},
    )
    return rows


def sweep_range(param: str, start: float, stop: float, step: float, **kwargs) -> list[SweepRow]:
    return sweep(param, inclusive_grid(start, stop, step), **kwargs)


def sortino_crossing(
    T: int,
    mu: float,
    mode: str | None = None,
    level: float = 2.0,
    p_from: float = 0.501,
    p_to: float = 0.999,
    step: float = 1e-3,
    grid_step: float | None = None,
) -> float | None:
    """Smallest p on the grid whose optimal Sortino ratio reaches ``level``."""
    for p in inclusive_grid(p_from, p_to, step):
        if optimize_theta(p, T, mu, mode=mode, grid_step=grid_step).phi_star >= level:
            return p
    return None
