from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime settings for the tomography engines, overridable through SCATTOMO_* variables."""

    model_config = SettingsConfigDict(
        env_prefix="SCATTOMO_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    THREADS: int = Field(default=1, ge=1)
    MAX_BASIS_DIMENSION: int = Field(default=2_000_000, ge=1)
    TRUNCATION_TOL: float = Field(default=1e-10, gt=0)
    UNITARITY_TOL: float = Field(default=1e-12, gt=0)

    # Gauss-Hermite quadrature for the wave-packet forward model
    QUADRATURE_NODES: int = Field(default=80, ge=2)
    QUADRATURE_CHECK_NODES: int = Field(default=120, ge=2)
    QUADRATURE_RTOL: float = Field(default=1e-7, gt=0)

    CONDITION_WARNING: float = 1e8
    LOG_LEVEL: str = "INFO"


# Module-level settings instance
settings = Settings()
