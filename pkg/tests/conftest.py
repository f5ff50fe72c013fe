"""Shared test configuration and fixtures."""

import logging

import numpy as np
import pytest
from click.testing import CliRunner

from kellysortino.services.backtest import PriceSeries


def make_series(closes, start: str = "2008-01-01") -> PriceSeries:
    """Series on consecutive business days starting at ``start``."""
    closes = np.asarray(closes, dtype=float)
    dates = np.busday_offset(np.datetime64(start, "D"), np.arange(len(closes)), roll="forward")
    return PriceSeries(dates=dates.astype("datetime64[D]"), closes=closes)


def random_walk_closes(n: int, seed: int = 7, start: float = 100.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return start * np.exp(np.cumsum(rng.normal(0.0003, 0.01, n)))


def prices_csv(series: PriceSeries) -> str:
    rows = [f"{d},{float(c)!r}" for d, c in zip(series.dates, series.closes)]
    return "date,close\n" + "\n".join(rows) + "\n"


@pytest.fixture(autouse=True)
def restore_logging():
    """CLI invocations reconfigure the root logger against CliRunner streams."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def walk_series():
    return make_series(random_walk_closes(400))


@pytest.fixture
def rising_series():
    return make_series(100.0 * 1.01 ** np.arange(60))


@pytest.fixture
def prices_file(tmp_path, walk_series):
    path = tmp_path / "prices.csv"
    path.write_text(prices_csv(walk_series), encoding="utf-8")
    return path


@pytest.fixture
def runner():
    return CliRunner()
