"""Pydantic models for every JSON artifact the CLI reads or writes."""

import math
from datetime import date

from pydantic import BaseModel, ConfigDict, model_validator

from kellysortino.services import backtest as bt
from kellysortino.services.sortino import OptimizationResult
from kellysortino.services.verification import CheckResult, VerifyOutcome


class Artifact(BaseModel):
    """Infinity sentinels are written as the JSON constants ``Infinity``/``-Infinity``."""
    model_config = ConfigDict(ser_json_inf_nan="constants")


# ---------------------------------------------------------------------------
# Kelly
# ---------------------------------------------------------------------------

class KellyReport(Artifact):
    p: float
    T: int
    theta_kelly: float
    no_bet: bool
    growth: float
    sharpe: float
    sharpe_scaled: float | None


class KellyCurveRow(Artifact):
    p: float
    sharpe_scaled: float


# ---------------------------------------------------------------------------
# Optimizer and sweeps
# ---------------------------------------------------------------------------

class OptimizeReport(Artifact):
    p: float
    T: int
    mu: float
    theta_star: float
    phi_star: float
    phi_infinite: bool
    w_max: int
    D: float
    mode: str
    grid_step: float
    no_bet: bool
    staircase_cell: tuple[float, float]
    evaluations: int

    @classmethod
    def from_result(cls, p: float, T: int, mu: float, result: OptimizationResult) -> "OptimizeReport":
        return cls(
            p=p,
            T=T,
            mu=mu,
            theta_star=result.theta_star,
            phi_star=result.phi_star,
            phi_infinite=math.isinf(result.phi_star),
            w_max=result.downside.alpha,
            D=result.downside.D,
            mode=result.mode,
            grid_step=result.grid_step,
            no_bet=result.no_bet,
            staircase_cell=result.staircase_cell,
            evaluations=result.evaluations,
        )


class SweepRow(Artifact):
    value: float
    theta_star: float
    phi_star: float
    w_max: int
    D: float
    no_bet: bool


# ---------------------------------------------------------------------------
# Backtest
# ---------------------------------------------------------------------------

class PeriodWindow(BaseModel):
    label: str
    start: date
    end: date

    @model_validator(mode="after")
    def _ordered(self) -> "PeriodWindow":
        if self.end < self.start:
            raise ValueError(f"Period {self.label!r} ends before it starts")
        return self

    def as_tuple(self) -> tuple[str, date, date]:
        return self.label, self.start, self.end


class BacktestConfigEcho(Artifact):
    accuracy: float
    horizon: int
    mu: float
    sims: int
    seed: int
    mode: str
    annualization: int
    bins: int
    grid_step: float


class HistogramBin(Artifact):
    bin_left: float
    bin_right: float
    density: float


class PeriodStats(Artifact):
    label: str
    start: date
    end: date
    count: int
    mean: float | None
    min: float | None
    max: float | None


class BacktestSummary(Artifact):
    theta_star: float
    mean_annualized_return: float
    stdev: float
    downside_deviation: float
    realized_sortino: float
    realized_sortino_infinite: bool
    realized_sharpe: float
    trades: int
    trading_days: int
    mass_positive: float
    mass_negative: float
    signal_accuracy: float
    horizon_hit_rate: float


class BacktestReportModel(Artifact):
    config: BacktestConfigEcho
    summary: BacktestSummary
    histogram: list[HistogramBin]
    per_period: list[PeriodStats]

    @classmethod
    def from_report(cls, report: bt.BacktestReport) -> "BacktestReportModel":
        cfg = report.config
        return cls(
            config=BacktestConfigEcho(
                accuracy=cfg.accuracy,
                horizon=cfg.horizon,
                mu=cfg.mu,
                sims=cfg.sims,
                seed=cfg.seed,
                mode=cfg.mode,
                annualization=cfg.annualization,
                bins=cfg.bins,
                grid_step=cfg.grid_step,
            ),
            summary=BacktestSummary(
                theta_star=report.theta_star,
                mean_annualized_return=report.mean_annualized_return,
                stdev=report.stdev,
                downside_deviation=report.downside_deviation,
                realized_sortino=report.realized_sortino,
                realized_sortino_infinite=math.isinf(report.realized_sortino),
                realized_sharpe=report.realized_sharpe,
                trades=report.trades,
                trading_days=report.trading_days,
                mass_positive=report.mass_positive,
                mass_negative=report.mass_negative,
                signal_accuracy=report.signal_accuracy,
                horizon_hit_rate=report.horizon_hit_rate,
            ),
            histogram=[HistogramBin(**vars(b)) for b in report.histogram],
            per_period=[PeriodStats(**vars(s)) for s in report.per_period],
        )


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

class VerifyCheck(Artifact):
    name: str
    passed: bool
    total: int
    failures: int
    detail: str
    first_failure: str | None = None
    warning: bool = False

    @classmethod
    def from_result(cls, result: CheckResult) -> "VerifyCheck":
        return cls(**vars(result))


class VerifyReport(Artifact):
    passed: bool
    checks: list[VerifyCheck]

    @classmethod
    def from_outcome(cls, outcome: VerifyOutcome) -> "VerifyReport":
        return cls(passed=outcome.passed, checks=[VerifyCheck.from_result(c) for c in outcome.checks])
