"""Application settings and configuration management."""

from functools import lru_cache
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Laboratory settings with validation and environment variable support.

    Every field can be overridden through a ``GRADFLOW_``-prefixed environment variable or a
    ``.env`` file in the working directory.
    """

    model_config = SettingsConfigDict(
        env_prefix="GRADFLOW_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Paths
    output_root: str = Field("runs", description="Default root for scenario artifacts")
    scenario_dir: str = Field("assets/scenarios", description="Directory of bundled scenarios")

    # Logging
    log_level: str = Field("INFO")
    log_dir: str = Field("logs")
    log_file: str = Field("gradflow_lab.log")
    json_logs: bool = Field(True, description="Write the rotating log file as JSON lines")

    # Execution
    workers: int = Field(4, ge=1, description="Concurrent scenarios in a sweep")
    seed: int = Field(0, description="Seed for sampled diagnostics")

    # Verification tolerances
    tolerance_scale: float = Field(1.0, gt=0.0)
    disc_tolerance_constant: float = Field(1.0, gt=0.0, description="C_disc in C_disc*h^2 + 1e-8")
    gradient_slack: float = Field(0.05, ge=0.0)
    pair_budget: int = Field(10_000_000, ge=1)
    exhaustive_pair_limit: int = Field(2**13, ge=1)
    near_diagonal_band: int = Field(4, ge=1)

    # Time stepping
    cfl_safety: float = Field(0.4, gt=0.0, le=1.0)
    dt_refresh_interval: int = Field(16, ge=1)
    max_steps: Optional[int] = Field(None, ge=1)


@lru_cache()
def get_settings() -> Settings:
    """Get cached application settings."""
    return Settings()
