from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Final

from ._utils import get_env

DEFAULT_MODULE_NAME: Final[str] = "qvit"


def _stderr_is_tty() -> bool:
    return bool(sys.stderr.isatty())


@dataclass
class LogSettings:
    """Logger configuration"""

    LEVEL: int = field(default_factory=get_env("LOG_LEVEL", 20, minimum=0))
    """Stdlib log levels.

    Only emit logs at this level, or higher.
    """
    JSON: bool = field(default_factory=get_env("LOG_JSON", not _stderr_is_tty()))
    """Render log lines as JSON instead of the console renderer."""
    EVENT_KEY: str = "message"
    """Key the structlog ``event`` is renamed to."""


@dataclass
class RunSettings:
    """Run directory layout and evaluation settings."""

    METRICS_FILENAME: str = field(default_factory=get_env("QVIT_METRICS_FILENAME", "metrics.jsonl"))
    """Newline-delimited JSON metrics log inside a run directory."""
    CHECKPOINT_FILENAME: str = field(default_factory=get_env("QVIT_CHECKPOINT_FILENAME", "model.qvck"))
    """Checkpoint written at the end of a run."""
    ALLOCATION_DIR: str = field(default_factory=get_env("QVIT_ALLOCATION_DIR", "allocations"))
    """Per-epoch allocation snapshots (CSV)."""
    LOCK_FILENAME: str = ".lock"
    """Lock file preventing concurrent writers."""
    NUM_EVAL_WORKERS: int = field(default_factory=get_env("QVIT_EVAL_WORKERS", 1, minimum=1))
    """Threads used to shard evaluation batches."""


@dataclass
class AppSettings:
    """Application configuration"""

    NAME: str = DEFAULT_MODULE_NAME
    """Application name."""
    DEBUG: bool = field(default_factory=get_env("QVIT_DEBUG", False))
    """Print tracebacks for application errors in the CLI."""


@dataclass
class Settings:
    app: AppSettings = field(default_factory=AppSettings)
    log: LogSettings = field(default_factory=LogSettings)
    run: RunSettings = field(default_factory=RunSettings)

    @classmethod
    def from_env(cls, dotenv_filename: str = ".env") -> Settings:
        env_file = Path(f"{os.curdir}/{dotenv_filename}")
        if env_file.is_file():
            from dotenv import load_dotenv

            load_dotenv(env_file, override=True)
        return Settings()


@lru_cache(maxsize=1, typed=True)
def get_settings() -> Settings:
    return Settings.from_env()
