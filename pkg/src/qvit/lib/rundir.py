from __future__ import annotations

import os
from contextlib import contextmanager
from pathlib import Path
from typing import TYPE_CHECKING

import structlog

from qvit.config import get_settings
from qvit.lib.exceptions import FileAccessError, RunDirectoryLockedError

if TYPE_CHECKING:
    from collections.abc import Iterator

__all__ = ("locked_run_dir",)

logger = structlog.get_logger()


@contextmanager
def locked_run_dir(run_dir: Path | str) -> Iterator[Path]:
    """Create ``run_dir`` and hold its lock file for the duration of the block.

    Raises:
        RunDirectoryLockedError: another writer holds the lock.
        FileAccessError: the directory cannot be created.
    """
    root = Path(run_dir)
    lock = root / get_settings().run.LOCK_FILENAME
    try:
        root.mkdir(parents=True, exist_ok=True)
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as e:
        msg = f"run directory {root} is locked by {lock}; remove it if no run is active"
        raise RunDirectoryLockedError(msg) from e
    except OSError as e:
        msg = f"cannot prepare run directory {root}: {e.strerror or e}"
        raise FileAccessError(msg) from e
    try:
        os.write(fd, str(os.getpid()).encode())
    finally:
        os.close(fd)
    logger.debug("run_dir_locked", run_dir=str(root))
    try:
        yield root
    finally:
        lock.unlink(missing_ok=True)
