from __future__ import annotations

import os
from pathlib import Path
from typing import TYPE_CHECKING, Final, TypeVar

from qvit.lib.exceptions import ConfigValidationError

if TYPE_CHECKING:
    from collections.abc import Callable

TRUE_VALUES: Final[frozenset[str]] = frozenset({"true", "1", "yes", "y", "t", "on"})
FALSE_VALUES: Final[frozenset[str]] = frozenset({"false", "0", "no", "n", "f", "off", ""})

EnvValue = TypeVar("EnvValue", bool, int, float, str, Path)


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in TRUE_VALUES:
        return True
    if lowered in FALSE_VALUES:
        return False
    msg = f"expected one of {sorted((TRUE_VALUES | FALSE_VALUES) - {''})}"
    raise ValueError(msg)


_PARSERS: Final[dict[type, Callable[[str], object]]] = {
    bool: _parse_bool,
    int: int,
    float: float,
    Path: Path,
    str: str,
}


def get_env(key: str, default: EnvValue, minimum: float | None = None) -> Callable[[], EnvValue]:
    """Deferred :func:`get_config_val`, for ``dataclasses.field(default_factory=...)``."""
    return lambda: get_config_val(key, default, minimum)


def get_config_val(key: str, default: EnvValue, minimum: float | None = None) -> EnvValue:
    """Read ``key`` from the environment, parsed as the type of ``default``.

    Raises:
        ConfigValidationError: the value does not parse or is below ``minimum``.
    """
    raw = os.getenv(key)
    if raw is None:
        return default
    value = raw.strip()
    # bool before int, Path covers PosixPath
    kind = next(t for t in _PARSERS if isinstance(default, t))
    try:
        parsed: EnvValue = _PARSERS[kind](value)  # type: ignore[assignment]
    except ValueError as e:
        msg = f"{key}={value!r} cannot be parsed as {kind.__name__}: {e}"
        raise ConfigValidationError(msg) from e
    if minimum is not None and isinstance(parsed, int | float) and parsed < minimum:
        msg = f"{key}={value!r} must be at least {minimum:g}"
        raise ConfigValidationError(msg)
    return parsed
