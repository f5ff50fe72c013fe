"""kellysortino CLI - Sortino-optimal Kelly allocations and signal backtests."""

import functools
import math
from datetime import date
from pathlib import Path

import click
import pandas as pd
from prometheus_client import REGISTRY, write_to_textfile
from pydantic import TypeAdapter, ValidationError

from kellysortino.config import settings
from kellysortino.errors import (
    ConsistencyError,
    DomainError,
    HorizonError,
    InsufficientDataError,
    PriceDataError,
)
from kellysortino.logging_setup import configure_logging
from kellysortino.schemas import (
    BacktestReportModel,
    KellyCurveRow,
    KellyReport,
    OptimizeReport,
    PeriodWindow,
    SweepRow,
    VerifyReport,
)
from kellysortino.services import backtest as bt
from kellysortino.services.charts import histogram_svg, line_chart_svg, timeseries_svg
from kellysortino.services.kellymath import (
    AllocationParams,
    growth_rate,
    kelly_allocation,
    kelly_sharpe_curve,
    kelly_sharpe_scaled,
    sharpe_ratio,
)
from kellysortino.services.sortino import optimize_theta, sweep_range
from kellysortino.services.verification import run_verification
from kellysortino.validation import (
    VALID_DOWNSIDE_PATHS,
    VALID_SORTINO_MODES,
    validate_probability,
)

CSV_FLOAT = "%.17g"

MODE = click.Choice(sorted(VALID_SORTINO_MODES))
PATH = click.Choice(sorted(VALID_DOWNSIDE_PATHS))


def handle_errors(fn):
    """Domain errors are usage errors (exit 2); data and consistency failures exit 1.

    A horizon longer than the price file is a data mismatch, not a bad flag.
    """
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HorizonError as e:
            raise click.ClickException(str(e))
        except DomainError as e:
            raise click.UsageError(str(e))
        except (PriceDataError, InsufficientDataError, ConsistencyError) as e:
            raise click.ClickException(str(e))
    return wrapper


def write_csv(frame: pd.DataFrame, out: str | None) -> None:
    text = frame.to_csv(index=False, float_format=CSV_FLOAT, lineterminator="\n")
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default=None,
    help="Log level for stderr output (default from KELLYSORTINO_LOG_LEVEL)",
)
@click.option("--log-json/--log-text", default=None, help="Structured JSON or plain-text logs")
@click.option("--metrics-file", type=click.Path(dir_okay=False), default=None, help="Write Prometheus metrics here on exit")
@click.pass_context
def cli(ctx: click.Context, log_level: str | None, log_json: bool | None, metrics_file: str | None):
    """kellysortino - Sortino-optimal Kelly allocations"""
    configure_logging(log_level or settings.log_level, settings.log_json if log_json is None else log_json)
    if metrics_file:
        ctx.call_on_close(lambda: write_to_textfile(metrics_file, REGISTRY))


# --- Verification ---


@cli.command("verify")
@click.option("--trials", type=click.IntRange(min=1), default=None, help="Randomized closed-form tuples (default 1000)")
@click.option("--seed", type=int, default=None, help="Seed of the oracle battery")
@click.option("--paths", type=click.IntRange(min=2), default=100_000, show_default=True, help="Monte Carlo paths for the variance check")
@click.option("--skip-crossing", is_flag=True, help="Skip the Sortino-2 crossing diagnostic")
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON")
@click.pass_context
@handle_errors
def verify(ctx: click.Context, trials: int | None, seed: int | None, paths: int, skip_crossing: bool, as_json: bool):
    """Run the oracle battery; exit 0 iff every check passes."""
    outcome = run_verification(trials=trials, seed=seed, n_paths=paths, include_crossing=not skip_crossing)
    if as_json:
        click.echo(VerifyReport.from_outcome(outcome).model_dump_json(indent=2))
    else:
        for check in outcome.checks:
            status = "PASS" if check.passed else "FAIL"
            if check.warning:
                status = "WARN"
            click.echo(f"{check.name}: {check.detail}  [{status}]")
            if check.first_failure:
                click.echo(f"    first failure: {check.first_failure}")
        click.echo("all checks passed" if outcome.passed else "verification FAILED")
    if not outcome.passed:
        ctx.exit(1)


# --- Kelly ---


@cli.command("kelly")
@click.option("--p", "p", type=float, required=True, help="Win probability, 0 < p < 1")
@click.option("--T", "T", type=click.IntRange(min=1), default=90, show_default=True, help="Number of bets (horizon)")
@click.option("--sweep", "emit_curve", is_flag=True, help="Emit the scaled Kelly Sharpe curve as CSV instead")
@click.option("--from", "p_from", type=float, default=0.505, show_default=True, help="Curve start")
@click.option("--to", "p_to", type=float, default=0.995, show_default=True, help="Curve end")
@click.option("--step", type=float, default=0.005, show_default=True, help="Curve step")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Curve CSV path (default stdout)")
@click.option("--svg", type=click.Path(dir_okay=False), default=None, help="Render the curve as SVG")
@handle_errors
def kelly(p: float, T: int, emit_curve: bool, p_from: float, p_to: float, step: float, out: str | None, svg: str | None):
    """Kelly allocation 2p-1 with its growth rate and Sharpe ratio."""
    validate_probability(p, open_interval=True)
    if emit_curve:
        curve = kelly_sharpe_curve(p_from, p_to, step)
        write_csv(pd.DataFrame([KellyCurveRow(p=x, sharpe_scaled=s).model_dump() for x, s in curve]), out)
        if svg:
            write_text(svg, line_chart_svg(
                [row[0] for row in curve],
                {"Kelly Sharpe / sqrt(T)": [row[1] for row in curve]},
                title="Kelly Sharpe ratio",
                x_label="p",
                y_label="Sharpe / sqrt(T)",
            ))
        return

    allocation = kelly_allocation(p)
    theta = 0.0 if allocation.no_bet else allocation.theta
    report = KellyReport(
        p=p,
        T=T,
        theta_kelly=theta,
        no_bet=allocation.no_bet,
        growth=growth_rate(p, theta),
        sharpe=sharpe_ratio(AllocationParams(p=p, T=T, mu=0.0, theta=theta)),
        sharpe_scaled=kelly_sharpe_scaled(p) if p > 0.5 else None,
    )
    click.echo(report.model_dump_json(indent=2))


# --- Optimizer ---


@cli.command("optimize")
@click.option("--p", "p", type=float, required=True, help="Win probability in [0, 1]")
@click.option("--T", "T", type=click.IntRange(min=1), required=True, help="Number of bets (horizon)")
@click.option("--mu", type=float, required=True, help="Desired growth rate as a decimal (0.03, not 3%)")
@click.option("--mode", type=MODE, default=None, help="Downside definition (default target_aware)")
@click.option("--grid-step", type=click.FloatRange(min=0.0, min_open=True), default=None, help="Theta grid spacing")
@click.option("--path", type=PATH, default=None, help="Downside evaluation path")
@handle_errors
def optimize(p: float, T: int, mu: float, mode: str | None, grid_step: float | None, path: str | None):
    """Sortino-optimal allocation theta* for (p, T, mu)."""
    result = optimize_theta(p, T, mu, mode=mode, grid_step=grid_step, path=path)
    click.echo(OptimizeReport.from_result(p, T, mu, result).model_dump_json(indent=2))


@cli.command("sweep")
@click.option("--param", type=click.Choice(["p", "mu"]), required=True, help="Parameter to sweep")
@click.option("--from", "start", type=float, required=True, help="First value")
@click.option("--to", "stop", type=float, required=True, help="Last value (inclusive)")
@click.option("--step", type=float, required=True, help="Step between values")
@click.option("--T", "T", type=click.IntRange(min=1), required=True, help="Number of bets (horizon)")
@click.option("--p", "p", type=float, default=None, help="Fixed p when sweeping mu")
@click.option("--mu", type=float, default=None, help="Fixed mu when sweeping p")
@click.option("--mode", type=MODE, default=None, help="Downside definition")
@click.option("--grid-step", type=click.FloatRange(min=0.0, min_open=True), default=None, help="Theta grid spacing")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True, help="Parallel processes")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path (default stdout)")
@click.option("--svg", type=click.Path(dir_okay=False), default=None, help="Render theta* and Phi* as SVG")
@handle_errors
def sweep(
    param: str, start: float, stop: float, step: float, T: int,
    p: float | None, mu: float | None, mode: str | None, grid_step: float | None,
    workers: int, out: str | None, svg: str | None,
):
    """Optimal theta* and Phi* over a range of p or mu."""
    rows = sweep_range(param, start, stop, step, T=T, p=p, mu=mu, mode=mode, grid_step=grid_step, workers=workers)
    frame = pd.DataFrame([SweepRow.model_validate(vars(r)).model_dump() for r in rows])
    frame = frame.rename(columns={"value": param})
    write_csv(frame, out)
    if svg:
        write_text(svg, line_chart_svg(
            frame[param].tolist(),
            {"theta*": frame["theta_star"].tolist(), "Phi*": frame["phi_star"].tolist()},
            title=f"Sortino-optimal allocation vs {param} (T={T})",
            x_label=param,
            y_label="theta* / Phi*",
        ))


# --- Backtest ---


def load_periods(path: str | None) -> list[tuple]:
    if path is None:
        return list(bt.DEFAULT_CRISIS_PERIODS)
    try:
        windows = TypeAdapter(list[PeriodWindow]).validate_json(Path(path).read_bytes())
    except ValidationError as e:
        raise click.ClickException(f"{path}: invalid periods file: {e}")
    return [w.as_tuple() for w in windows]


@cli.command("backtest")
@click.option("--prices", type=click.Path(exists=True, dir_okay=False), required=True, help="CSV with header date,close")
@click.option("--p", "p", type=float, default=0.6, show_default=True, help="Signal accuracy")
@click.option("--T", "T", type=click.IntRange(min=1), default=100, show_default=True, help="Holding period in trading days")
@click.option("--mu", type=float, default=0.03, show_default=True, help="Desired annual return as a decimal")
@click.option("--sims", type=click.IntRange(min=1), default=20_000, show_default=True, help="Monte Carlo replications")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True, help="64-bit seed")
@click.option("--mode", type=MODE, default=None, help="Downside definition for theta*")
@click.option("--periods", type=click.Path(exists=True, dir_okay=False), default=None, help="Periods JSON (default: built-in crisis windows)")
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True, help="Output directory")
@click.option("--hist-svg", type=click.Path(dir_okay=False), default=None, help="Render the return histogram as SVG")
@click.option("--timeseries-svg", "timeseries_path", type=click.Path(dir_okay=False), default=None, help="Render per-date mean returns over the period windows as SVG")
@click.option("--bins", type=click.IntRange(min=1), default=None, help="Histogram bins (default 200)")
@click.option("--annualization", type=click.Choice(["252", "365"]), default=None, help="Days per year")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Parallel processes")
@handle_errors
def backtest(
    prices: str, p: float, T: int, mu: float, sims: int, seed: int, mode: str | None,
    periods: str | None, out: str, hist_svg: str | None, timeseries_path: str | None, bins: int | None,
    annualization: str | None, workers: int | None,
):
    """Replay the signal strategy on a price history and pool per-trade returns."""
    try:
        series = bt.ingest_prices(prices)
    except PriceDataError as e:
        raise click.ClickException(f"{prices}: {e}")

    cfg = bt.SignalConfig(
        accuracy=p,
        horizon=T,
        mu=mu,
        sims=sims,
        seed=seed,
        mode=mode or settings.sortino_mode,
        annualization=int(annualization) if annualization else settings.trading_days_per_year,
        bins=bins or settings.histogram_bins,
    )
    windows = load_periods(periods)
    report = bt.run_backtest(series, cfg, periods=windows, workers=workers)
    model = BacktestReportModel.from_report(report)

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_text(out_dir / "report.json", model.model_dump_json(indent=2) + "\n")

    trades = bt.run_strategy(series, bt.simulate_signals(series, cfg, 0), report.theta_star, T, cfg.annualization)
    frame = pd.DataFrame(
        [(t.entry_date.isoformat(), t.direction, t.raw_return, t.strategy_return, t.annualized_return) for t in trades],
        columns=["entry_date", "direction", "raw_return", "strategy_return", "annualized_return"],
    )
    write_csv(frame, str(out_dir / "trades.csv"))
    daily = bt.daily_returns(report)
    write_csv(daily, str(out_dir / "daily_returns.csv"))

    if timeseries_path:
        write_text(timeseries_path, timeseries_svg(
            [d.astype(date) for d in report.daily.dates],
            {
                "strategy": daily["mean_annualized_return"].tolist(),
                "market": daily["market_annualized_return"].tolist(),
            },
            windows,
            title=f"Mean annualized return by entry date (p={p}, T={T})",
        ))

    if hist_svg:
        write_text(hist_svg, histogram_svg(
            [(b.bin_left, b.bin_right) for b in report.histogram],
            [b.density for b in report.histogram],
            title=f"Return probabilities (p={p}, T={T}, mu={mu})",
            x_label="annualized return",
        ))

    sortino = "inf" if math.isinf(report.realized_sortino) else f"{report.realized_sortino:.4f}"
    click.echo(
        f"theta*={report.theta_star:.6g}  mean={report.mean_annualized_return:.4%}  "
        f"sortino={sortino}  sharpe={report.realized_sharpe:.4f}  trades={report.trades}"
    )
    click.echo(f"Wrote {out_dir / 'report.json'}, {out_dir / 'trades.csv'}, {out_dir / 'daily_returns.csv'}")


if __name__ == "__main__":
    cli()
