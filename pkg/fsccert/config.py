"""Configuration module for fsccert runs."""

import json
import os
from pathlib import Path
from typing import Any, Literal, Mapping

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator

load_dotenv()

# Paths
PROJECT_ROOT = Path(__file__).parent.parent
DATA_DIR: Path = Path(os.getenv("FSCCERT_DATA_DIR", str(PROJECT_ROOT / "data")))

# Execution defaults
DEFAULT_WORKERS: int = int(os.getenv("FSCCERT_WORKERS", "1"))
DEFAULT_BUDGET: int = int(os.getenv("FSCCERT_BUDGET", "100000"))
DEFAULT_WALL_TIME: float = float(os.getenv("FSCCERT_WALL_TIME", "600"))
DEFAULT_SEED: int = int(os.getenv("FSCCERT_SEED", "0"))
CONFIG_PATH: str = os.getenv("FSCCERT_CONFIG", "")
LOG_LEVEL: str = os.getenv("FSCCERT_LOG_LEVEL", "WARNING")


def parse_origins(raw: str) -> list[str]:
    """Split a comma-separated origin list, dropping blanks."""
    return [origin.strip() for origin in raw.split(",") if origin.strip()]


# API; none by default
CORS_ORIGINS: list[str] = parse_origins(os.getenv("CORS_ORIGINS", ""))

# Heuristic optimizer defaults
DEFAULT_RESTARTS: int = 8
DEFAULT_ITERATIONS: int = 200
LINE_SEARCH_TOL: float = 1e-9

# Evaluation precision exponent for report mode when no k is given
REPORT_PRECISION_BITS: int = 20

# Environment variable -> RunConfig field
ENV_FIELDS: dict[str, str] = {
    "FSCCERT_WORKERS": "workers",
    "FSCCERT_BUDGET": "budget",
    "FSCCERT_WALL_TIME": "wall_time",
    "FSCCERT_SEED": "seed",
}

# Fields that change how fast a run is, never what it outputs
EXECUTION_FIELDS: frozenset[str] = frozenset({"workers", "wall_time"})


class RunConfig(BaseModel):
    """Resolved settings for one CLI or API invocation."""

    k: int | None = Field(None, ge=0, description="Target precision exponent")
    M: int | None = Field(None, ge=1, description="Grid resolution (report mode) or R exponent")
    n: int | None = Field(None, ge=1, description="Horizon")
    n_range: tuple[int, int] | None = Field(None, description="Inclusive horizon range")
    budget: int = Field(DEFAULT_BUDGET, gt=0, description="Policy-count cap")
    wall_time: float = Field(DEFAULT_WALL_TIME, gt=0, description="Wall-time budget in seconds")
    workers: int = Field(DEFAULT_WORKERS, gt=0)
    seed: int = DEFAULT_SEED
    mode: Literal["target", "report", "heuristic"] = "target"
    strategy: Literal["auto", "grid", "bracket"] = "auto"
    approx_mode: Literal["target", "report"] = "target"
    output: Literal["table", "records"] = "table"
    restarts: int = Field(DEFAULT_RESTARTS, gt=0)
    iterations: int = Field(DEFAULT_ITERATIONS, gt=0)
    normalized: bool = False

    @field_validator("n_range")
    @classmethod
    def _check_range(cls, value: tuple[int, int] | None) -> tuple[int, int] | None:
        if value is not None and not 1 <= value[0] <= value[1]:
            raise ValueError(f"invalid horizon range: {value}")
        return value

    def result_fields(self) -> dict[str, Any]:
        """Settings that determine results (execution-only fields removed)."""
        return self.model_dump(exclude=set(EXECUTION_FIELDS))


def load_config_file(path: str | Path | None) -> dict[str, Any]:
    """Load RunConfig overrides from a JSON file.

    Args:
        path: Path to a JSON object of RunConfig fields; empty means none

    Returns:
        Dict of overrides (empty when no file is configured)
    """
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must contain a JSON object")
    return data


def env_overrides(environ: Mapping[str, str]) -> dict[str, Any]:
    """Extract RunConfig overrides from environment variables."""
    return {field: environ[var] for var, field in ENV_FIELDS.items() if var in environ}


def resolve_config(
    flags: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
    config_file: str | Path | None = None,
) -> RunConfig:
    """Resolve a RunConfig with precedence flags > environment > file > defaults.

    Args:
        flags: Explicitly passed settings; None values are ignored
        environ: Environment mapping (defaults to os.environ)
        config_file: JSON config file (defaults to FSCCERT_CONFIG)

    Returns:
        Validated RunConfig
    """
    environ = os.environ if environ is None else environ
    if config_file is None:
        config_file = environ.get("FSCCERT_CONFIG", CONFIG_PATH)

    merged: dict[str, Any] = {}
    merged.update(load_config_file(config_file))
    merged.update(env_overrides(environ))
    merged.update({key: value for key, value in (flags or {}).items() if value is not None})
    return RunConfig(**merged)
