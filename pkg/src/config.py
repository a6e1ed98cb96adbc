"""Configuration management for the scheduler."""

from typing import Literal, Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings."""

    # Logging Configuration
    log_level: str = Field("INFO", description="Logging level")
    structured_logging: bool = Field(True, description="Enable structured logging")

    # Solver Configuration
    feasibility_tol: float = Field(
        1e-6, gt=0, description="Primal feasibility tolerance of the simplex"
    )
    integrality_tol: float = Field(
        1e-6, gt=0, description="Distance from 0/1 under which a binary is integral"
    )
    relative_gap: float = Field(
        1e-4, gt=0, description="Relative optimality gap closing branch-and-bound"
    )
    node_limit: Optional[int] = Field(
        None, description="Maximum branch-and-bound nodes (unlimited if unset)"
    )
    time_limit_seconds: Optional[float] = Field(
        None, description="Wall-clock limit per solve (unlimited if unset)"
    )
    external_solver_template: str = Field(
        "{command} {model} {solution}",
        description="Argument template for external solvers "
        "(e.g. '{command} {model} solve solu {solution}' for CBC)",
    )
    external_solver_retries: int = Field(
        3, ge=1, description="Attempts for an external solver killed by a signal"
    )

    # Controller Configuration
    delta_soc_forecast: Literal["running_mean", "timetable"] = Field(
        "running_mean",
        description="Source of trip ΔSOC forecasts: per-bus running mean or the timetable",
    )
    forecast_noise_fraction: float = Field(
        0.0,
        ge=0,
        description="Std-dev of realized trip energy noise as a fraction of the prior mean",
    )
    carry_realized_peak: bool = Field(
        True, description="Use the realized episode peak as a floor for window peaks"
    )

    # Reporting Configuration
    include_other_loads: bool = Field(
        True, description="Count other-load purchases in AOC"
    )
    sweep_workers: int = Field(1, ge=1, description="Parallel episode workers in sweeps")
    knee_threshold: float = Field(
        0.001, gt=0, description="Marginal AOC improvement below which a sweep has converged"
    )

    model_config = SettingsConfigDict(env_file=".env", env_prefix="PEBFCS_")


# Global settings instance
settings = Settings()
