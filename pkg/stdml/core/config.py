"""
Application configuration and environment variables
"""
from typing import Optional
from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process settings loaded from environment variables (STDML_ prefix) and .env"""

    # Application
    APP_NAME: str = "stdml"
    ENV: str = "development"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # Execution
    MAX_WORKERS: int = 1  # 1 = serial; >1 runs folds / replicates in a process pool
    OUTPUT_DIR: str = "."

    # Estimation defaults (overridable per run)
    DEFAULT_FOLDS: int = 10
    DEFAULT_KNOTS: int = 100
    DEFAULT_NEIGHBOR_SCHEME: str = "queen8"

    # Optional location of a default run config file
    DEFAULT_RUN_CONFIG: Optional[str] = None

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        """Accept log levels in any case"""
        return str(v).upper()

    @field_validator("MAX_WORKERS")
    @classmethod
    def validate_max_workers(cls, v: int) -> int:
        """At least one worker"""
        if v < 1:
            raise ValueError("MAX_WORKERS must be >= 1")
        return v

    model_config = SettingsConfigDict(
        env_prefix="STDML_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )


# Global settings instance
settings = Settings()
