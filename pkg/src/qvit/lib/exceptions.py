"""qvit exception types.

Every error the package raises on purpose derives from :class:`ApplicationError`.
Each class carries the process exit code the CLI uses when it escapes a command.
"""

from __future__ import annotations

from typing import Any, ClassVar

__all__ = (
    "AllocationFormatError",
    "ApplicationClientError",
    "ApplicationError",
    "ArityError",
    "CheckpointMagicError",
    "CheckpointTruncatedError",
    "CheckpointVersionError",
    "ComputationError",
    "ConfigValidationError",
    "EmptySampleError",
    "FileAccessError",
    "FormatError",
    "IdxCountMismatchError",
    "IdxMagicError",
    "IdxTruncatedError",
    "LabelRangeError",
    "ModelStateError",
    "NonFiniteError",
    "NonPositiveScaleError",
    "RunDirectoryLockedError",
    "ShapeMismatchError",
    "TapeConsumedError",
)


class ApplicationError(Exception):
    """Base exception type for the lib's custom exception types."""

    detail: str
    exit_code: ClassVar[int] = 1

    def __init__(self, *args: Any, detail: str = "") -> None:
        """Initialize ``ApplicationError``.

        Args:
            *args: args are converted to :class:`str` before passing to :class:`Exception`
            detail: detail of the exception.
        """
        str_args = [str(arg) for arg in args if arg]
        if not detail:
            if str_args:
                detail, *str_args = str_args
            elif hasattr(self, "detail"):
                detail = self.detail
        self.detail = detail
        super().__init__(*str_args)

    def __repr__(self) -> str:
        if self.detail:
            return f"{self.__class__.__name__} - {self.detail}"
        return self.__class__.__name__

    def __str__(self) -> str:
        return " ".join((*self.args, self.detail)).strip()


class ApplicationClientError(ApplicationError):
    """Base exception type for client errors."""

    exit_code = 2


class FileAccessError(ApplicationClientError):
    """A path could not be read or written."""

    exit_code = 3


class ConfigValidationError(ApplicationClientError):
    """A JSON configuration document violates its schema."""

    exit_code = 4


class FormatError(ApplicationError):
    """File content does not follow its binary or text format."""

    exit_code = 5


class IdxMagicError(FormatError):
    """IDX file starts with an unexpected magic number."""


class IdxTruncatedError(FormatError):
    """IDX file is shorter than its header declares."""


class IdxCountMismatchError(FormatError):
    """IDX image and label files disagree on the item count."""


class CheckpointMagicError(FormatError):
    """Checkpoint does not start with the expected magic bytes."""


class CheckpointVersionError(FormatError):
    """Checkpoint format version is not supported."""


class CheckpointTruncatedError(FormatError):
    """Checkpoint header or payload is shorter than declared."""


class AllocationFormatError(FormatError):
    """Allocation CSV is malformed."""


class RunDirectoryLockedError(ApplicationError):
    """Another writer holds the run directory."""

    exit_code = 6


class ComputationError(ApplicationError):
    """A numerical contract of an operation was violated."""

    exit_code = 7


class ShapeMismatchError(ComputationError):
    """Operand shapes are incompatible."""


class NonFiniteError(ComputationError):
    """A tensor would hold NaN or Inf."""


class ArityError(ComputationError):
    """A backward rule returned the wrong number of gradients."""


class TapeConsumedError(ComputationError):
    """Backward was already run on this tape."""


class LabelRangeError(ComputationError):
    """A class label lies outside ``[0, num_classes)``."""


class NonPositiveScaleError(ComputationError):
    """A quantization scale is zero or negative."""


class EmptySampleError(ComputationError):
    """Scale calibration received no usable sample.

    Callers fall back to a unit scale.
    """


class ModelStateError(ApplicationError):
    """Model, allocation and checkpoint do not fit together."""

    exit_code = 8
