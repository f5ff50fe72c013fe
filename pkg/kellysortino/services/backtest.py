"""Signal-driven Monte Carlo backtest on a daily closing-price series.

For every trading day t a benefactor signal s_t = sign(P[t+1] - P[t]) * xi_t
is drawn, with xi_t = +1 with probability `accuracy`. A position of size
theta* (the Sortino-optimal allocation) is opened in the signal's direction
and unwound T trading days later. Positions overlap; per-trade returns are
pooled over every entry date and every replication rather than compounded.

Because a trade's return only depends on the entry date and its direction,
replications are aggregated as per-date long/short counts. The pooled sample
is then exactly the multiset {+r_t x longs[t]} U {-r_t x shorts[t]}.
"""

import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import IO

import numpy as np
import pandas as pd

from kellysortino.config import settings
from kellysortino.errors import (
    DomainError,
    EmptySeriesError,
    HorizonError,
    InsufficientDataError,
    PriceOrderError,
    PriceParseError,
)
from kellysortino.metrics import BACKTEST_DURATION, BACKTEST_REPLICATIONS_TOTAL
from kellysortino.services.sortino import optimize_theta
from kellysortino.validation import (
    validate_fraction,
    validate_horizon,
    validate_probability,
    validate_sortino_mode,
)

logger = logging.getLogger(__name__)

# Header row is line 1, so the first data row is reported as row 2.
_FIRST_DATA_ROW = 2
_REPLICATION_BLOCK = 256

# Labelled crisis windows overlaid on the date-indexed return series.
DEFAULT_CRISIS_PERIODS: list[tuple[str, date, date]] = [
    ("1987 crash", date(1987, 8, 25), date(1987, 12, 4)),
    ("1990 Gulf War recession", date(1990, 7, 16), date(1990, 10, 11)),
    ("1997 Asian crisis", date(1997, 7, 2), date(1997, 11, 30)),
    ("1998 Russia/LTCM", date(1998, 7, 17), date(1998, 10, 15)),
    ("2000-2002 dot-com bust", date(2000, 3, 10), date(2002, 10, 9)),
    ("2007-2009 financial crisis", date(2007, 10, 9), date(2009, 3, 9)),
    ("2010 flash crash / euro debt", date(2010, 4, 23), date(2010, 7, 2)),
    ("2011 US downgrade", date(2011, 7, 22), date(2011, 10, 3)),
    ("2015-2016 China slowdown", date(2015, 8, 10), date(2016, 2, 11)),
    ("2018 Q4 sell-off", date(2018, 10, 3), date(2018, 12, 24)),
]


@dataclass(frozen=True)
class PriceSeries:
    dates: np.ndarray    # datetime64[D], strictly increasing
    closes: np.ndarray   # float64, > 0

    def __post_init__(self):
        for arr in (self.dates, self.closes):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.closes)

    @property
    def entries(self) -> list[tuple[date, float]]:
        return [(d.astype(date), float(c)) for d, c in zip(self.dates, self.closes)]


@dataclass(frozen=True)
class SignalConfig:
    accuracy: float
    horizon: int
    mu: float
    sims: int
    seed: int
    mode: str = field(default_factory=lambda: settings.sortino_mode)
    annualization: int = field(default_factory=lambda: settings.trading_days_per_year)
    bins: int = field(default_factory=lambda: settings.histogram_bins)
    grid_step: float = field(default_factory=lambda: settings.grid_step)

    def __post_init__(self):
        validate_probability(self.accuracy)
        validate_horizon(self.horizon)
        validate_sortino_mode(self.mode)
        if not math.isfinite(self.mu):
            raise DomainError(f"Desired rate mu must be finite: {self.mu}")
        if self.sims < 1:
            raise DomainError(f"Number of simulations must be >= 1: {self.sims}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"Seed must be a 64-bit unsigned integer: {self.seed}")
        if self.annualization not in (252, 365):
            raise DomainError(f"Annualization must be 252 or 365 days: {self.annualization}")
        if self.bins < 1:
            raise DomainError(f"Histogram needs at least one bin: {self.bins}")


@dataclass(frozen=True)
class TradeRecord:
    entry_date: date
    direction: int
    allocation: float
    raw_return: float
    strategy_return: float
    annualized_return: float


@dataclass(frozen=True)
class DailyPositions:
    """Per-entry-date aggregate of all replications."""
    dates: np.ndarray
    annualized: np.ndarray   # theta* x raw return x (days per year / T), i.e. a long's return
    market: np.ndarray       # raw T-day return annualized the same way, unlevered
    longs: np.ndarray
    shorts: np.ndarray


@dataclass(frozen=True)
class HistogramBin:
    bin_left: float
    bin_right: float
    density: float


@dataclass(frozen=True)
class PeriodStats:
    label: str
    start: date
    end: date
    count: int
    mean: float | None
    min: float | None
    max: float | None


@dataclass(frozen=True)
class BacktestReport:
    config: SignalConfig
    theta_star: float
    mean_annualized_return: float
    stdev: float
    downside_deviation: float
    realized_sortino: float
    realized_sharpe: float
    trades: int
    trading_days: int
    mass_positive: float
    mass_negative: float
    signal_accuracy: float
    horizon_hit_rate: float
    histogram: list[HistogramBin]
    per_period: list[PeriodStats]
    daily: DailyPositions


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def ingest_prices(source: str | Path | bytes | IO) -> PriceSeries:
    """Read a ``date,close`` CSV (ISO-8601 dates, UTF-8, LF or CRLF)."""
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    try:
        frame = pd.read_csv(
            source,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            skip_blank_lines=False,
            encoding="utf-8-sig",
        )
    except pd.errors.EmptyDataError:
        raise EmptySeriesError("Price file is empty")
    except pd.errors.ParserError as e:
        raise PriceParseError(f"Malformed price file: {e}")

    frame.columns = [str(c).strip().lower() for c in frame.columns]
    if not {"date", "close"} <= set(frame.columns):
        raise PriceParseError(
            f"Price file header must be 'date,close', got {','.join(frame.columns)}", row=1
        )
    # Blank lines stay in the frame so index i is always file line i + 2;
    # trailing ones are dropped, interior ones are rejected below.
    frame = frame.fillna("")
    blank = (frame.apply(lambda col: col.str.strip()) == "").all(axis=1).to_numpy()
    tail = len(frame)
    while tail and blank[tail - 1]:
        tail -= 1
    frame = frame.iloc[:tail]
    if frame.empty:
        raise EmptySeriesError("Price file has a header but no rows")

    raw_dates = frame["date"].str.strip()
    raw_closes = frame["close"].str.strip()
    dates = pd.to_datetime(raw_dates, format="%Y-%m-%d", errors="coerce")
    closes = pd.to_numeric(raw_closes, errors="coerce")

    for i in range(len(frame)):
        row = i + _FIRST_DATA_ROW
        if blank[i]:
            raise PriceParseError(f"Row {row}: empty row", row=row)
        if pd.isna(dates.iat[i]):
            raise PriceParseError(f"Row {row}: invalid date {raw_dates.iat[i]!r}", row=row)
        close = closes.iat[i]
        if pd.isna(close) or not math.isfinite(close):
            raise PriceParseError(f"Row {row}: non-numeric close {raw_closes.iat[i]!r}", row=row)
        if close <= 0.0:
            raise PriceParseError(f"Row {row}: non-positive close {raw_closes.iat[i]}", row=row)

    day = dates.to_numpy(dtype="datetime64[D]")
    steps = np.diff(day)
    bad = np.nonzero(steps <= np.timedelta64(0, "D"))[0]
    if len(bad):
        i = int(bad[0]) + 1
        kind = "duplicate" if steps[bad[0]] == np.timedelta64(0, "D") else "out-of-order"
        row = i + _FIRST_DATA_ROW
        raise PriceOrderError(f"Row {row}: {kind} date {raw_dates.iat[i]}", row=row)

    series = PriceSeries(dates=day, closes=closes.to_numpy(dtype=float))
    logger.info(
        "Ingested price series",
        extra={
            "event": "ingest",
            "rows": len(series),
            "first_date": str(day[0]),
            "last_date": str(day[-1]),
        },
    )
    return series


# ---------------------------------------------------------------------------
# Signals and trades
# ---------------------------------------------------------------------------

def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Private substream for one replication, derived from (seed, replication) only."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication,)))


def _draw_signals(moves: np.ndarray, accuracy: float, seed: int, replication: int) -> np.ndarray:
    xi = np.where(replication_rng(seed, replication).random(len(moves)) < accuracy, 1, -1)
    return (moves * xi).astype(np.int8)


def simulate_signals(series: PriceSeries, cfg: SignalConfig, replication: int) -> np.ndarray:
    """s_t = sign(P[t+1] - P[t]) * xi_t for t = 0 .. len(series) - 2; flat days give 0."""
    if not 0 <= replication < cfg.sims:
        raise DomainError(f"Replication {replication} outside 0..{cfg.sims - 1}")
    return _draw_signals(np.sign(np.diff(series.closes)).astype(np.int8), cfg.accuracy, cfg.seed, replication)


def _check_horizon(series: PriceSeries, T: int) -> int:
    validate_horizon(T)
    n_trades = len(series) - T
    if n_trades < 1:
        raise HorizonError(f"Horizon T={T} needs at least {T + 1} prices, series has {len(series)}")
    return n_trades


def _raw_returns(series: PriceSeries, T: int) -> np.ndarray:
    n_trades = _check_horizon(series, T)
    return series.closes[T:] / series.closes[:n_trades] - 1.0


def run_strategy(
    series: PriceSeries,
    signals: np.ndarray,
    theta_star: float,
    T: int,
    annualization: int | None = None,
) -> list[TradeRecord]:
    """One record per entry date t with t+T inside the series (trading-day index)."""
    validate_fraction(theta_star)
    if theta_star < 0.0:
        raise DomainError(f"Allocation must satisfy 0 <= theta < 1: {theta_star}")
    raw = _raw_returns(series, T)
    days = annualization or settings.trading_days_per_year
    directions = np.asarray(signals[: len(raw)], dtype=int)
    strategy = directions * theta_star * raw
    return [
        TradeRecord(
            entry_date=series.dates[t].astype(date),
            direction=int(directions[t]),
            allocation=theta_star,
            raw_return=float(raw[t]),
            strategy_return=float(strategy[t]),
            annualized_return=float(strategy[t] * (days / T)),
        )
        for t in range(len(raw))
    ]


def _replicate_block(moves: np.ndarray, n_trades: int, accuracy: float, seed: int, start: int, stop: int):
    """Long/short counts per entry date and signal hits for replications start..stop-1."""
    longs = np.zeros(n_trades, dtype=np.int64)
    shorts = np.zeros(n_trades, dtype=np.int64)
    hits = 0
    for replication in range(start, stop):
        signals = _draw_signals(moves, accuracy, seed, replication)
        hits += int(np.count_nonzero((signals == moves) & (moves != 0)))
        entry = signals[:n_trades]
        longs += entry == 1
        shorts += entry == -1
    return longs, shorts, hits


def _aggregate(series: PriceSeries, cfg: SignalConfig, n_trades: int, workers: int):
    moves = np.sign(np.diff(series.closes)).astype(np.int8)
    blocks = [
        (start, min(start + _REPLICATION_BLOCK, cfg.sims))
        for start in range(0, cfg.sims, _REPLICATION_BLOCK)
    ]
    args = [(moves, n_trades, cfg.accuracy, cfg.seed, start, stop) for start, stop in blocks]
    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_replicate_block, *zip(*args)))
    else:
        parts = [_replicate_block(*a) for a in args]

    longs = np.zeros(n_trades, dtype=np.int64)
    shorts = np.zeros(n_trades, dtype=np.int64)
    hits = 0
    for block_longs, block_shorts, block_hits in parts:
        longs += block_longs
        shorts += block_shorts
        hits += block_hits
    nonflat = int(np.count_nonzero(moves)) * cfg.sims
    return longs, shorts, (hits / nonflat if nonflat else math.nan)


# ---------------------------------------------------------------------------
# Pooled statistics
# ---------------------------------------------------------------------------

def _pooled_sample(daily: DailyPositions) -> tuple[np.ndarray, np.ndarray]:
    values = np.concatenate((daily.annualized, -daily.annualized))
    weights = np.concatenate((daily.longs, daily.shorts)).astype(float)
    keep = weights > 0
    return values[keep], weights[keep]


def _histogram_range(values: np.ndarray) -> tuple[float, float]:
    """Observed [min, max], widened when the spread is too small to split into finite bins."""
    lo, hi = float(values.min()), float(values.max())
    pad = 1e-9 * max(abs(lo), abs(hi), 1.0)
    if hi - lo < pad:
        mid = 0.5 * (lo + hi)
        return mid - pad, mid + pad
    return lo, hi


def _histogram(values: np.ndarray, weights: np.ndarray, bins: int) -> list[HistogramBin]:
    counts, edges = np.histogram(values, bins=bins, range=_histogram_range(values), weights=weights)
    mass = counts / weights.sum()
    return [
        HistogramBin(bin_left=float(edges[i]), bin_right=float(edges[i + 1]), density=float(mass[i]))
        for i in range(bins)
    ]


def step_target(cfg: SignalConfig) -> float:
    """Annual desired rate expressed per trading day, the growth model's bet step."""
    return cfg.mu / cfg.annualization


def realized_sharpe(mean: float, stdev: float) -> float:
    return 0.0 if stdev == 0.0 else mean / stdev


def realized_sortino(mean: float, downside: float, target: float) -> float:
    excess = mean - target
    if downside > 0.0:
        return excess / downside
    return math.inf if excess > 0.0 else 0.0


def run_backtest(
    series: PriceSeries,
    cfg: SignalConfig,
    periods: list[tuple[str, date, date]] | None = None,
    theta_star: float | None = None,
    workers: int | None = None,
) -> BacktestReport:
    """Replicate the signal strategy cfg.sims times and pool every trade.

    theta* comes from the Sortino optimizer unless ``theta_star`` is given. cfg.mu
    is an annual rate; the optimizer sees it per trading day (mu / annualization)
    since each bet step of the growth model is one day.

    Realized Sortino uses cfg.mu as an annual target and the lower partial
    moment of the pooled annualized returns about it; realized Sharpe is
    mean / stdev of the same sample.
    """
    started = time.perf_counter()
    n_trades = _check_horizon(series, cfg.horizon)
    if theta_star is None:
        theta_star = optimize_theta(
            cfg.accuracy, cfg.horizon, step_target(cfg), mode=cfg.mode, grid_step=cfg.grid_step
        ).theta_star

    raw = _raw_returns(series, cfg.horizon)
    factor = cfg.annualization / cfg.horizon
    longs, shorts, accuracy = _aggregate(series, cfg, n_trades, workers or settings.backtest_workers)
    BACKTEST_REPLICATIONS_TOTAL.inc(cfg.sims)

    daily = DailyPositions(
        dates=series.dates[:n_trades],
        annualized=theta_star * raw * factor,
        market=raw * factor,
        longs=longs,
        shorts=shorts,
    )
    values, weights = _pooled_sample(daily)
    total = int(weights.sum())
    if total < settings.min_trades:
        raise InsufficientDataError(f"Only {total} trades; need at least {settings.min_trades}")

    mean = float(np.sum(weights * values) / total)
    stdev = float(np.sqrt(np.sum(weights * (values - mean) ** 2) / (total - 1)))
    downside = float(np.sqrt(np.sum(weights * np.minimum(values - cfg.mu, 0.0) ** 2) / total))
    hit = (longs * (raw > 0)).sum() + (shorts * (raw < 0)).sum()

    report = BacktestReport(
        config=cfg,
        theta_star=float(theta_star),
        mean_annualized_return=mean,
        stdev=stdev,
        downside_deviation=downside,
        realized_sortino=realized_sortino(mean, downside, cfg.mu),
        realized_sharpe=realized_sharpe(mean, stdev),
        trades=total,
        trading_days=len(series),
        mass_positive=float(weights[values > 0].sum() / total),
        mass_negative=float(weights[values < 0].sum() / total),
        signal_accuracy=float(accuracy),
        horizon_hit_rate=float(hit / total),
        histogram=_histogram(values, weights, cfg.bins),
        per_period=[],
        daily=daily,
    )
    if periods:
        report = _with_periods(report, periods)

    elapsed = time.perf_counter() - started
    BACKTEST_DURATION.observe(elapsed)
    logger.info(
        "Backtest complete",
        extra={
            "event": "backtest",
            "sims": cfg.sims,
            "trades": total,
            "theta_star": report.theta_star,
            "mean_annualized_return": mean,
            "realized_sortino": report.realized_sortino,
            "realized_sharpe": report.realized_sharpe,
            "elapsed_s": round(elapsed, 3),
        },
    )
    return report


def _with_periods(report: BacktestReport, periods: list[tuple[str, date, date]]) -> BacktestReport:
    return replace(report, per_period=period_overlay(report, periods))


# ---------------------------------------------------------------------------
# Period overlay
# ---------------------------------------------------------------------------

def period_overlay(report: BacktestReport, periods: list[tuple[str, date, date]]) -> list[PeriodStats]:
    """Pooled trade statistics for trades whose entry date falls in each window."""
    daily = report.daily
    stats = []
    for label, start, end in periods:
        if end < start:
            raise DomainError(f"Period {label!r} ends before it starts")
        mask = (daily.dates >= np.datetime64(start, "D")) & (daily.dates <= np.datetime64(end, "D"))
        window = DailyPositions(
            dates=daily.dates[mask],
            annualized=daily.annualized[mask],
            market=daily.market[mask],
            longs=daily.longs[mask],
            shorts=daily.shorts[mask],
        )
        values, weights = _pooled_sample(window)
        count = int(weights.sum())
        if count == 0:
            logger.warning(
                "Period window holds no trades",
                extra={"event": "period_overlay", "label": label, "start": str(start), "end": str(end)},
            )
            stats.append(PeriodStats(label=label, start=start, end=end, count=0, mean=None, min=None, max=None))
            continue
        stats.append(
            PeriodStats(
                label=label,
                start=start,
                end=end,
                count=count,
                mean=float(np.sum(weights * values) / count),
                min=float(values.min()),
                max=float(values.max()),
            )
        )
    return stats


def daily_returns(report: BacktestReport) -> pd.DataFrame:
    """Mean annualized strategy return per entry date across replications, beside the market's."""
    daily = report.daily
    traded = daily.longs + daily.shorts
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = np.where(traded > 0, (daily.longs - daily.shorts) * daily.annualized / traded, np.nan)
    return pd.DataFrame(
        {
            "date": pd.to_datetime(daily.dates).strftime("%Y-%m-%d"),
            "mean_annualized_return": mean,
            "market_annualized_return": daily.market,
            "trades": traded,
        }
    )


# ---------------------------------------------------------------------------
# Growth-rate path simulation
# ---------------------------------------------------------------------------

def simulate_growth_paths(p: float, theta: float, T: int, n_paths: int, seed: int) -> np.ndarray:
    """n_paths realizations of the T-bet growth rate G_T.

    Each path draws eta_t in {-1, +1} with P[+1] = p and averages
    ln(1 + eta_t theta) over the T bets.
    """
    p = validate_probability(p)
    theta = validate_fraction(theta)
    validate_horizon(T)
    if n_paths < 1:
        raise DomainError(f"Number of paths must be >= 1: {n_paths}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    wins = (rng.random((n_paths, T)) < p).sum(axis=1)
    return (wins * math.log1p(theta) + (T - wins) * math.log1p(-theta)) / T
