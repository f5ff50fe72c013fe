"""Classical Kelly quantities for 1:1 binary bets.

A bet of fraction theta wins theta with probability p and loses theta
otherwise. Over T bets the realized growth rate is

    G_T = (W/T) ln(1+theta) + ((T-W)/T) ln(1-theta),    W ~ Binomial(T, p)

whose mean is the Kelly growth rate and whose variance shrinks like 1/T.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from kellysortino.errors import DomainError
from kellysortino.validation import (
    validate_fraction,
    validate_horizon,
    validate_probability,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AllocationParams:
    p: float
    T: int
    mu: float
    theta: float

    def __post_init__(self):
        validate_probability(self.p)
        validate_horizon(self.T)
        validate_fraction(self.theta)
        if not math.isfinite(self.mu):
            raise DomainError(f"Desired rate mu must be finite: {self.mu}")


@dataclass(frozen=True)
class KellyAllocation:
    theta: float
    no_bet: bool


@dataclass(frozen=True)
class GrowthStats:
    mean: float
    variance: float
    sharpe: float


@dataclass(frozen=True)
class StationarityAnalysis:
    roots: list[float]
    interior_root: bool
    min_residual: float
    samples: int


def log_odds(theta: float) -> float:
    """ln((1+theta)/(1-theta)), the per-bet spread between a win and a loss."""
    return math.log1p(theta) - math.log1p(-theta)


def growth_rate(p: float, theta: float) -> float:
    p = validate_probability(p)
    theta = validate_fraction(theta)
    # p * ln(1+theta) with p == 0 must stay 0 even when theta is near -1
    win = p * math.log1p(theta) if p else 0.0
    loss = (1.0 - p) * math.log1p(-theta) if p != 1.0 else 0.0
    return loss + win


def kelly_allocation(p: float) -> KellyAllocation:
    """theta = 2p - 1, flagged no-bet when the edge is not positive."""
    p = validate_probability(p)
    theta = 2.0 * p - 1.0
    return KellyAllocation(theta=theta, no_bet=theta <= 0.0)


def growth_variance(p: float, theta: float, T: int) -> float:
    return log_odds(theta) ** 2 * p * (1.0 - p) / T


def sharpe_ratio(params: AllocationParams, benchmark: float = 0.0) -> float:
    """Sharpe ratio of the finite-horizon growth rate.

    With ``benchmark=0`` this is exactly
        sqrt(T/(p(1-p))) * (p - 1/2 + ln(1-theta^2) / (2 ln((1+theta)/(1-theta)))).
    At theta = 0 the theta -> 0 limit sqrt(T/(p(1-p))) * (p - 1/2) is returned
    (benchmark must then be 0 for the limit to exist).
    """
    p, T, theta = params.p, params.T, params.theta
    if p in (0.0, 1.0):
        raise DomainError(f"Sharpe ratio needs 0 < p < 1: {p}")
    scale = math.sqrt(T / (p * (1.0 - p)))
    if theta == 0.0:
        if benchmark != 0.0:
            raise DomainError("Sharpe ratio at theta = 0 is unbounded for a nonzero benchmark")
        return scale * (p - 0.5)
    spread = log_odds(theta)
    mean_term = p - 0.5 + 0.5 * math.log1p(-theta * theta) / spread
    return scale * (mean_term - benchmark / spread)


def growth_stats(params: AllocationParams, benchmark: float = 0.0) -> GrowthStats:
    return GrowthStats(
        mean=growth_rate(params.p, params.theta),
        variance=growth_variance(params.p, params.theta, params.T),
        sharpe=sharpe_ratio(params, benchmark),
    )


def _validate_kelly_p(p: float) -> float:
    if not (math.isfinite(p) and 0.5 < p < 1.0):
        raise DomainError(f"Kelly Sharpe ratio needs 0.5 < p < 1: {p}")
    return p


def kelly_sharpe_scaled(p: float) -> float:
    """Sharpe ratio at the Kelly allocation with the sqrt(T) factor removed."""
    p = _validate_kelly_p(p)
    q = 1.0 - p
    return (p - 0.5 + math.log(4.0 * p * q) / (2.0 * math.log(p / q))) / math.sqrt(p * q)


def kelly_sharpe(p: float, T: int) -> float:
    validate_horizon(T)
    return math.sqrt(T) * kelly_sharpe_scaled(p)


def kelly_sharpe_curve(p_from: float = 0.505, p_to: float = 0.995, step: float = 0.005) -> list[tuple[float, float]]:
    """(p, scaled Kelly Sharpe) rows over an inclusive p grid."""
    return [(p, kelly_sharpe_scaled(p)) for p in inclusive_grid(p_from, p_to, step)]


def kelly_sharpe_crossing(level: float = 1.0, xtol: float = 1e-10) -> float:
    """p at which the scaled Kelly Sharpe ratio reaches ``level``."""
    lo, hi = 0.5 + 1e-9, 1.0 - 1e-12
    if not (kelly_sharpe_scaled(lo) < level < kelly_sharpe_scaled(hi)):
        raise DomainError(f"Level {level} is not crossed on (0.5, 1)")
    return brentq(lambda p: kelly_sharpe_scaled(p) - level, lo, hi, xtol=xtol)


def sharpe_stationarity_residual(theta: float) -> float:
    """ln(1-theta^2) + theta ln((1+theta)/(1-theta)).

    Evaluated in the equivalent form (1-theta) ln(1-theta) + (1+theta) ln(1+theta),
    which is >= 0 with equality only at theta = 0.
    """
    theta = validate_fraction(theta)
    return (1.0 - theta) * math.log1p(-theta) + (1.0 + theta) * math.log1p(theta)


def sharpe_stationarity_roots(lo: float = 1e-6, hi: float = 1.0 - 1e-6, samples: int = 10_000) -> StationarityAnalysis:
    """Bracket sign changes of the stationarity residual on [lo, hi].

    The residual is strictly positive away from 0, so on (0, 1) this reports
    no interior root.
    """
    validate_fraction(lo)
    validate_fraction(hi)
    if not lo < hi:
        raise DomainError(f"Empty search interval: [{lo}, {hi}]")
    grid = np.linspace(lo, hi, samples)
    values = np.array([sharpe_stationarity_residual(t) for t in grid])
    roots = [float(t) for t, v in zip(grid, values) if v == 0.0]
    for i in np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]:
        roots.append(brentq(sharpe_stationarity_residual, grid[i], grid[i + 1]))
    roots.sort()
    interior = any(0.0 < r < 1.0 for r in roots)
    if not interior:
        logger.debug(
            "Sharpe stationarity residual has no interior root",
            extra={"event": "stationarity", "min_residual": float(values.min())},
        )
    return StationarityAnalysis(
        roots=roots,
        interior_root=interior,
        min_residual=float(values.min()),
        samples=samples,
    )


def inclusive_grid(start: float, stop: float, step: float) -> list[float]:
    """start, start+step, ... up to and including stop (within 1e-9 of a step)."""
    if step <= 0.0:
        raise DomainError(f"Step must be positive: {step}")
    if stop < start:
        raise DomainError(f"Empty range: from {start} to {stop}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]
