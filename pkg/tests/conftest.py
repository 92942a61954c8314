from __future__ import annotations

from typing import TYPE_CHECKING

import pytest
import structlog

from qvit.config import base

if TYPE_CHECKING:
    from collections.abc import Iterator

    from pytest import MonkeyPatch


pytest_plugins = [
    "tests.data_fixtures",
]


@pytest.fixture(autouse=True)
def _patch_settings(monkeypatch: MonkeyPatch, tmp_path_factory: pytest.TempPathFactory) -> Iterator[None]:
    """Fresh settings per test, isolated from any local ``.env``."""
    monkeypatch.chdir(tmp_path_factory.mktemp("cwd"))
    monkeypatch.setenv("LOG_JSON", "true")
    monkeypatch.setenv("QVIT_EVAL_WORKERS", "1")
    monkeypatch.delenv("QVIT_DEBUG", raising=False)
    base.get_settings.cache_clear()
    yield
    base.get_settings.cache_clear()
    structlog.reset_defaults()
    structlog.contextvars.clear_contextvars()
