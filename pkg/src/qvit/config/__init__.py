from __future__ import annotations

from . import constants
from .app import configure_logging
from .base import DEFAULT_MODULE_NAME, Settings, get_settings

__all__ = (
    "DEFAULT_MODULE_NAME",
    "Settings",
    "configure_logging",
    "constants",
    "get_settings",
)
