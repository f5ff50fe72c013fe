"""Input validation utilities."""

import math

from kellysortino.errors import DomainError

VALID_SORTINO_MODES = {"paper_fidelity", "target_aware"}
VALID_DOWNSIDE_PATHS = {"direct_sum", "closed_form"}


def is_valid_probability(p: float) -> bool:
    return math.isfinite(p) and 0.0 <= p <= 1.0


def is_valid_fraction(theta: float) -> bool:
    return math.isfinite(theta) and abs(theta) < 1.0


def is_valid_horizon(T: int) -> bool:
    return isinstance(T, int) and not isinstance(T, bool) and T >= 1


def validate_probability(p: float, *, open_interval: bool = False) -> float:
    if not is_valid_probability(p):
        raise DomainError(f"Probability must lie in [0, 1]: {p}")
    if open_interval and p in (0.0, 1.0):
        raise DomainError(f"Probability must lie in (0, 1): {p}")
    return float(p)


def validate_fraction(theta: float) -> float:
    if not is_valid_fraction(theta):
        raise DomainError(f"Allocation must satisfy |theta| < 1: {theta}")
    return float(theta)


def validate_horizon(T: int) -> int:
    if not is_valid_horizon(T):
        raise DomainError(f"Horizon must be a positive integer: {T}")
    return T


def validate_binomial_index(T: int, x: int) -> tuple[int, int]:
    if not isinstance(T, int) or T < 0:
        raise DomainError(f"Trial count must be a non-negative integer: {T}")
    if not isinstance(x, int) or x < 0 or x > T:
        raise DomainError(f"Index must satisfy 0 <= x <= T (T={T}): {x}")
    return T, x


def validate_inc_beta_args(z: float, a: float, b: float) -> tuple[float, float, float]:
    if not (math.isfinite(z) and 0.0 <= z <= 1.0):
        raise DomainError(f"Incomplete beta argument z must lie in [0, 1]: {z}")
    if not (math.isfinite(a) and a > 0.0):
        raise DomainError(f"Incomplete beta parameter a must be > 0: {a}")
    if not (math.isfinite(b) and b > 0.0):
        raise DomainError(f"Incomplete beta parameter b must be > 0: {b}")
    return float(z), float(a), float(b)


def validate_sortino_mode(mode: str) -> str:
    if mode not in VALID_SORTINO_MODES:
        raise DomainError(
            f"Invalid Sortino mode: {mode}. "
            f"Valid modes: {', '.join(sorted(VALID_SORTINO_MODES))}"
        )
    return mode


def validate_downside_path(path: str) -> str:
    if path not in VALID_DOWNSIDE_PATHS:
        raise DomainError(
            f"Invalid downside path: {path}. "
            f"Valid paths: {', '.join(sorted(VALID_DOWNSIDE_PATHS))}"
        )
    return path
