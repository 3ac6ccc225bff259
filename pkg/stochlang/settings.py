"""
Runtime settings for stochlang, read from STOCHLANG_* environment variables or a .env file.
"""

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from stochlang.stochlang_constants import NUMERIC_DEFAULTS


class StochlangSettings(BaseSettings):
    """Numeric tolerances, budgets and logging level."""

    model_config = SettingsConfigDict(env_prefix="STOCHLANG_", env_file=".env", extra="ignore")

    tolerance: float = Field(default=NUMERIC_DEFAULTS["tolerance"], gt=0)
    enumeration_budget: int = Field(default=NUMERIC_DEFAULTS["enumeration_budget"], ge=1)
    pivot_threshold: float = Field(default=NUMERIC_DEFAULTS["pivot_threshold"], gt=0)
    cross_check_length: int = Field(default=NUMERIC_DEFAULTS["cross_check_length"], ge=2)
    cross_check_divergence: float = Field(default=NUMERIC_DEFAULTS["cross_check_divergence"], gt=0)
    residual_factor: float = Field(default=NUMERIC_DEFAULTS["residual_factor"], gt=0)
    sample_c1: float = Field(default=NUMERIC_DEFAULTS["sample_c1"], gt=0)
    sample_c2: float = Field(default=NUMERIC_DEFAULTS["sample_c2"], gt=0)
    default_seed: int = NUMERIC_DEFAULTS["default_seed"]
    log_level: str = "WARNING"


@lru_cache(maxsize=1)
def get_settings() -> StochlangSettings:
    return StochlangSettings()
