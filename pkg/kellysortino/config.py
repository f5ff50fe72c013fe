from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="KELLYSORTINO_",
        env_file=".env",
        extra="ignore",
    )

    # Optimizer grid over theta in [0, 1 - theta_upper_guard]
    grid_step: float = 5e-4
    theta_upper_guard: float = 1e-6

    # "target_aware" puts mu inside the squared shortfall; "paper_fidelity"
    # reproduces the literal denominator with no mu in the square.
    sortino_mode: str = "target_aware"
    downside_path: str = "direct_sum"

    # Re-check every closed-form evaluation against the direct sum.
    verify_closed_form: bool = False
    closed_form_rtol: float = 1e-9

    # Backtest
    trading_days_per_year: int = 252
    histogram_bins: int = 200
    backtest_workers: int = 1
    min_trades: int = 10

    # Oracle battery
    verify_trials: int = 1000
    verify_seed: int = 20190828

    log_level: str = "INFO"
    log_json: bool = True


settings = Settings()
