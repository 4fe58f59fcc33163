"""Configuration management for the noiselab toolkit."""

from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Numerical and runtime settings with environment variable support.

    Every field can be overridden with a ``NOISELAB_`` prefixed variable,
    e.g. ``NOISELAB_QUAD_RTOL=1e-9``.
    """

    model_config = SettingsConfigDict(
        env_prefix="NOISELAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application Configuration
    app_name: str = Field(default="noiselab")
    app_version: str = Field(default="0.1.0")
    environment: str = Field(default="development")

    # Logging Configuration
    log_level: str = Field(default="WARNING")
    log_format: str = Field(default="console")
    log_file: Optional[str] = Field(default=None)

    # Quadrature Configuration
    quad_rtol: float = Field(default=1e-8, gt=0, lt=1)
    quad_atol: float = Field(default=1e-13, ge=0)
    halfline_rtol: float = Field(default=1e-6, gt=0, lt=1)
    graded_ratio: float = Field(default=1.01, gt=1, description="Panel growth on log-graded grids")
    head_width: float = Field(default=40.0, gt=0, description="Width of the u = ln(1/t) window")
    head_panels: int = Field(default=40, ge=2)
    head_nodes: int = Field(default=16, ge=4)
    lambda_batch: int = Field(default=64, ge=1)

    # Spectrum Table Configuration
    table_uniform_max: float = Field(default=5000.0, gt=0)
    table_uniform_step: float = Field(default=0.5, gt=0)
    table_log_max: float = Field(default=1e9, gt=0)
    table_per_decade: int = Field(default=64, ge=4)

    # Frequency-Domain Inner Products
    freq_lambda_max: float = Field(default=5000.0, gt=0)
    freq_step: float = Field(default=0.05, gt=0)
    tail_warn_fraction: float = Field(default=0.01, gt=0)

    # Trend Classification
    stabilizing_threshold: float = Field(default=0.05, gt=0)
    diverging_threshold: float = Field(default=0.05, gt=0)
    collapse_tolerance: float = Field(default=0.02, gt=0)
    separation_floor: float = Field(default=0.2, gt=0, lt=1)
    kakutani_convergent_ratio: float = Field(default=0.75, gt=0, lt=1)
    kakutani_divergent_ratio: float = Field(default=0.9, gt=0, lt=1)

    # Simulation Configuration
    max_bins: int = Field(default=4096, ge=2)
    bootstrap_resamples: int = Field(default=200, ge=10)

    # Measures and Fock Configuration
    log_underflow_floor: float = Field(default=-700.0, lt=0)
    fock_dim: int = Field(default=60, ge=2)
    fock_tail_tolerance: float = Field(default=1e-8, gt=0)

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in valid_levels:
            raise ValueError(f"Log level must be one of: {valid_levels}")
        return v.upper()

    @field_validator("log_format")
    @classmethod
    def validate_log_format(cls, v: str) -> str:
        """Validate log renderer."""
        valid_formats = ["json", "console"]
        if v.lower() not in valid_formats:
            raise ValueError(f"Log format must be one of: {valid_formats}")
        return v.lower()

    @field_validator("environment")
    @classmethod
    def validate_environment(cls, v: str) -> str:
        """Validate environment."""
        valid_envs = ["development", "staging", "production"]
        if v.lower() not in valid_envs:
            raise ValueError(f"Environment must be one of: {valid_envs}")
        return v.lower()


def get_settings() -> Settings:
    """Get application settings instance."""
    return Settings()


# Global settings instance
settings = get_settings()
