from __future__ import annotations

import pytest

from qvit.lib import exceptions
from qvit.lib.exceptions import ApplicationError


def test_detail_from_first_argument() -> None:
    exc = ApplicationError("cannot read model.qvck")
    assert exc.detail == "cannot read model.qvck"
    assert str(exc) == "cannot read model.qvck"
    assert repr(exc) == "ApplicationError - cannot read model.qvck"


def test_explicit_detail_keeps_arguments() -> None:
    exc = exceptions.FormatError("model.qvck:", detail="bad magic")
    assert str(exc) == "model.qvck: bad magic"


def test_empty_error() -> None:
    assert str(ApplicationError()) == ""
    assert repr(ApplicationError()) == "ApplicationError"


@pytest.mark.parametrize(
    ("exc", "code"),
    [
        (exceptions.ApplicationError, 1),
        (exceptions.ApplicationClientError, 2),
        (exceptions.FileAccessError, 3),
        (exceptions.ConfigValidationError, 4),
        (exceptions.CheckpointMagicError, 5),
        (exceptions.IdxTruncatedError, 5),
        (exceptions.AllocationFormatError, 5),
        (exceptions.RunDirectoryLockedError, 6),
        (exceptions.ShapeMismatchError, 7),
        (exceptions.EmptySampleError, 7),
        (exceptions.ModelStateError, 8),
    ],
)
def test_exit_codes(exc: type[ApplicationError], code: int) -> None:
    assert exc.exit_code == code
    assert exc("x").exit_code == code


def test_every_exported_error_is_an_application_error() -> None:
    for name in exceptions.__all__:
        assert issubclass(getattr(exceptions, name), ApplicationError)
