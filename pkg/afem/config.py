"""Configuration management for AFEM."""

import logging
from pathlib import Path
from typing import Any

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, field_validator
from pydantic import ValidationError as PydanticValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from afem.core.constants import Segment, SolverDefaults, Tolerances
from afem.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Application configuration."""

    threads: int = Field(default=1, ge=1, alias="AFEM_THREADS", description="Worker threads for element loops")
    output_dir: Path = Field(
        default_factory=lambda: Path.cwd() / "results",
        alias="AFEM_OUTPUT_DIR",
        description="Output directory for experiment results",
    )
    cache_dir: Path = Field(
        default_factory=lambda: Path.home() / ".afem" / "cache",
        alias="AFEM_CACHE_DIR",
        description="Directory for cached reference solutions",
    )

    # Solver configuration
    newton_eps: float = Field(default=Tolerances.NEWTON_EPS, gt=0, alias="AFEM_NEWTON_EPS")
    reference_eps: float = Field(default=Tolerances.REFERENCE_EPS, gt=0, alias="AFEM_REFERENCE_EPS")
    newton_max_iter: int = Field(default=SolverDefaults.NEWTON_MAX_ITER, ge=1, alias="AFEM_NEWTON_MAX_ITER")
    cg_tol: float = Field(default=Tolerances.CG_TOL, gt=0, alias="AFEM_CG_TOL")

    # Adaptive loop configuration
    max_k: int = Field(default=SolverDefaults.MAX_ADAPTIVE_ITERATIONS, ge=0, alias="AFEM_MAX_K")
    initial_h: float = Field(default=0.2, gt=0, alias="AFEM_INITIAL_H", description="Initial uniform mesh size")
    reference_h: float = Field(default=1 / 512, gt=0, alias="AFEM_REFERENCE_H", description="Reference mesh size")

    model_config = SettingsConfigDict(
        case_sensitive=False,
        env_file=".env",
        env_file_encoding="utf-8",
        populate_by_name=True,
        extra="ignore",
    )


def load_settings() -> Settings:
    """Load configuration from environment and .env file."""
    return Settings()


class ProblemConfig(BaseModel):
    """Problem overrides read from a ``key = value`` file."""

    model_config = ConfigDict(extra="forbid")

    example: int = Field(default=1, ge=1, le=2)
    c1: PositiveFloat | None = None
    c2: PositiveFloat | None = None
    c3: PositiveFloat | None = None
    c4: PositiveFloat | None = None
    c5: PositiveFloat | None = None
    sigma: PositiveFloat | None = None
    gamma_c: list[Segment] | None = None
    gamma_0: list[Segment] | None = None

    @field_validator("gamma_c", "gamma_0", mode="before")
    @classmethod
    def split_segments(cls, v: Any) -> Any:
        """Accept comma-separated segment names."""
        if isinstance(v, str):
            return [part.strip() for part in v.split(",") if part.strip()]
        return v


def load_problem_config(path: Path) -> ProblemConfig:
    """Parse a problem configuration file.

    Args:
        path: File with ``key = value`` lines (``#`` comments allowed)

    Returns:
        Validated problem overrides

    Raises:
        ConfigurationError: If the file is missing or holds invalid entries
    """
    if not path.is_file():
        raise ConfigurationError(f"Problem config not found: {path}", {"path": str(path)})

    raw = {key.strip().lower(): value for key, value in dotenv_values(path).items() if value is not None}
    logger.debug(f"Read {len(raw)} problem config entries from {path}")

    try:
        return ProblemConfig.model_validate(raw)
    except PydanticValidationError as e:
        raise ConfigurationError(f"Invalid problem config {path}: {e}", {"path": str(path)}) from e
