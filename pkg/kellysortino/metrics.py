"""Prometheus metrics definitions for kellysortino.

The CLI is a batch tool, so the default registry is flushed to a node-exporter
textfile (``--metrics-file``) instead of being scraped.
"""

from prometheus_client import Counter, Histogram, Info

# ---------------------------------------------------------------------------
# Sortino machinery
# ---------------------------------------------------------------------------

SORTINO_EVALUATIONS_TOTAL = Counter(
    "kellysortino_sortino_evaluations_total",
    "Scalar Sortino ratio evaluations",
    ["mode", "path"],
)

OPTIMIZER_RUNS_TOTAL = Counter(
    "kellysortino_optimizer_runs_total",
    "Theta grid-search optimizations",
    ["mode", "no_bet"],   # no_bet: "true" | "false"
)

OPTIMIZER_DURATION = Histogram(
    "kellysortino_optimizer_duration_seconds",
    "Theta grid-search latency",
    buckets=[0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0],
)

# ---------------------------------------------------------------------------
# Backtest
# ---------------------------------------------------------------------------

BACKTEST_REPLICATIONS_TOTAL = Counter(
    "kellysortino_backtest_replications_total",
    "Monte Carlo signal replications simulated",
)

BACKTEST_DURATION = Histogram(
    "kellysortino_backtest_duration_seconds",
    "End-to-end backtest latency",
    buckets=[0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0, 120.0, 600.0],
)

# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

VERIFY_CHECKS_TOTAL = Counter(
    "kellysortino_verify_checks_total",
    "Oracle checks executed",
    ["check", "outcome"],   # outcome: "pass" | "fail"
)

SERVICE_INFO = Info(
    "kellysortino_build",
    "kellysortino build metadata",
)
SERVICE_INFO.info({"version": "0.1.0"})
