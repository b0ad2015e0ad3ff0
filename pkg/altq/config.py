from __future__ import annotations

import logging
import sys
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class AltqSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="ALTQ_", env_file=".env", extra="ignore")

    threads: int = Field(default=1, ge=1)
    threshold_cap: int = Field(default=100_000, ge=1)
    log_level: str = "WARNING"
    genfunc_max_condition: float = Field(default=1e12, gt=1)
    root_merge_tolerance: float = Field(default=1e-8, gt=0)


@lru_cache
def get_settings() -> AltqSettings:
    return AltqSettings()


def configure_logging(level: str | None = None) -> None:
    # stderr only: stdout carries the JSON / CSV products
    name = (level or get_settings().log_level).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.WARNING),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )
