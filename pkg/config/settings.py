from functools import lru_cache
import os

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

load_dotenv()

VERSION = "0.3.0"

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True)

    log_level: str = Field("INFO", description="Log level for the solver and the app")
    truncation_ceiling: int = Field(65536, ge=2, description="Maximum truncation for adaptive PGF inversion")
    mean_rtol: float = Field(1e-8, gt=0, description="Relative tail tolerance of the mean queue length")
    queue_ceiling: int = Field(10_000_000, ge=1, description="Simulator queue-length ceiling")
    fd_step: float = Field(1e-6, gt=0, description="Central difference step for cofactor derivatives")
    tv_threshold: float = Field(0.01, gt=0, description="Compare: maximum total-variation distance")
    mean_sigma: float = Field(3.0, gt=0, description="Compare: maximum mean delta in half-widths")
    sweep_workers: int = Field(1, ge=1, description="Worker threads for sweep points")
    allowed_origins: list[str] = Field(default_factory=lambda: ["*"], description="CORS origins")


def _env(name, default, cast):
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        raise ValueError(f"{name} has an invalid value: {raw!r}")


@lru_cache
def get_settings() -> Settings:
    log_level = os.getenv("SMQ_LOG", "INFO").upper()
    if log_level not in LOG_LEVELS:
        raise ValueError(f"SMQ_LOG must be one of {', '.join(LOG_LEVELS)}, got {log_level!r}")

    return Settings(
        log_level=log_level,
        truncation_ceiling=_env("SMQ_TRUNCATION_CEILING", 65536, int),
        mean_rtol=_env("SMQ_MEAN_RTOL", 1e-8, float),
        queue_ceiling=_env("SMQ_QUEUE_CEILING", 10_000_000, lambda v: int(float(v))),
        fd_step=_env("SMQ_FD_STEP", 1e-6, float),
        tv_threshold=_env("SMQ_TV_THRESHOLD", 0.01, float),
        mean_sigma=_env("SMQ_MEAN_SIGMA", 3.0, float),
        sweep_workers=_env("SMQ_SWEEP_WORKERS", 1, int),
        allowed_origins=[o.strip() for o in os.getenv("SMQ_ALLOWED_ORIGINS", "*").split(",") if o.strip()],
    )
