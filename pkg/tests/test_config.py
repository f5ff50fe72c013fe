"""Tests for environment-driven settings."""

from kellysortino.config import Settings


class TestSettings:
    def test_defaults(self):
        s = Settings(_env_file=None)
        assert s.grid_step == 5e-4
        assert s.sortino_mode == "target_aware"
        assert s.trading_days_per_year == 252
        assert s.histogram_bins == 200
        assert s.min_trades == 10
        assert s.verify_trials == 1000

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("KELLYSORTINO_SORTINO_MODE", "paper_fidelity")
        monkeypatch.setenv("KELLYSORTINO_BACKTEST_WORKERS", "4")
        s = Settings(_env_file=None)
        assert s.sortino_mode == "paper_fidelity"
        assert s.backtest_workers == 4
