"""IDX (MNIST-style) image and label files.

Layout, all integers big-endian::

    images: magic 0x00000803 | count | rows | cols | count*rows*cols unsigned bytes
    labels: magic 0x00000801 | count | count unsigned bytes

Gzip-compressed files are detected by their signature and decompressed
transparently.
"""

from __future__ import annotations

import gzip
import struct
from typing import TYPE_CHECKING

import numpy as np
import structlog

from qvit.config.constants import IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC
from qvit.lib.exceptions import IdxCountMismatchError, IdxMagicError, IdxTruncatedError, ShapeMismatchError
from qvit.lib.io import read_bytes, write_bytes

from .dataset import Dataset

if TYPE_CHECKING:
    from pathlib import Path

    from numpy.typing import NDArray

__all__ = ("load_idx", "read_idx_images", "read_idx_labels", "write_idx")

logger = structlog.get_logger()

_GZIP_SIGNATURE = b"\x1f\x8b"


def _read(path: Path | str) -> bytes:
    raw = read_bytes(path)
    if raw[:2] == _GZIP_SIGNATURE:
        try:
            return gzip.decompress(raw)
        except (OSError, EOFError) as e:
            msg = f"{path}: gzip stream is damaged"
            raise IdxTruncatedError(msg) from e
    return raw


def _header(raw: bytes, path: Path | str, magic: int, fields: int) -> tuple[int, ...]:
    size = 4 * (fields + 1)
    if len(raw) < size:
        msg = f"{path}: {len(raw)} bytes is shorter than the {size}-byte IDX header"
        raise IdxTruncatedError(msg)
    found, *dims = struct.unpack(f">{fields + 1}I", raw[:size])
    if found != magic:
        msg = f"{path}: magic number {found:#010x}, expected {magic:#010x}"
        raise IdxMagicError(msg)
    need = size + int(np.prod(dims, dtype=np.int64))
    if len(raw) < need:
        msg = f"{path}: header declares {need} bytes, file has {len(raw)}"
        raise IdxTruncatedError(msg)
    return tuple(dims)


def read_idx_images(path: Path | str) -> NDArray[np.uint8]:
    raw = _read(path)
    count, rows, cols = _header(raw, path, IDX_IMAGES_MAGIC, 3)
    return np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16).reshape(count, rows, cols)


def read_idx_labels(path: Path | str) -> NDArray[np.uint8]:
    raw = _read(path)
    (count,) = _header(raw, path, IDX_LABELS_MAGIC, 1)
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8)


def load_idx(
    images_path: Path | str,
    labels_path: Path | str,
    num_classes: int | None = None,
    split: str = "idx",
) -> Dataset:
    """Load an IDX pair as ``[N, 1, rows, cols]`` images normalized to ``[-1, 1]``.

    Raises:
        IdxMagicError: a file starts with the wrong magic number.
        IdxTruncatedError: a file is shorter than its header declares.
        IdxCountMismatchError: the two files disagree on the item count.
    """
    pixels = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if pixels.shape[0] != labels.shape[0]:
        msg = f"{images_path} holds {pixels.shape[0]} images but {labels_path} holds {labels.shape[0]} labels"
        raise IdxCountMismatchError(msg)
    images = (pixels.astype(np.float64) / 255.0 - 0.5) / 0.5
    classes = num_classes if num_classes is not None else max(int(labels.max(initial=0)) + 1, 2)
    logger.info("idx_loaded", images=str(images_path), count=int(labels.shape[0]), rows=pixels.shape[1])
    return Dataset(images[:, None, :, :], labels.astype(np.int64), classes, split)


def _encode(path: Path | str, payload: bytes) -> bytes:
    return gzip.compress(payload, mtime=0) if str(path).endswith(".gz") else payload


def write_idx(dataset: Dataset, images_path: Path | str, labels_path: Path | str) -> None:
    """Write a single-channel dataset back to IDX, pixels rounded to bytes."""
    count, channels, rows, cols = dataset.images.shape
    if channels != 1:
        msg = f"IDX holds single-channel images, dataset has {channels} channels"
        raise ShapeMismatchError(msg)
    if dataset.labels.size and dataset.labels.max() > 255:
        msg = "IDX labels are single bytes"
        raise ShapeMismatchError(msg)
    pixels = np.clip(np.round((dataset.images[:, 0] + 1.0) * 255.0 / 2.0), 0, 255).astype(np.uint8)
    images = struct.pack(">IIII", IDX_IMAGES_MAGIC, count, rows, cols) + pixels.tobytes()
    labels = struct.pack(">II", IDX_LABELS_MAGIC, count) + dataset.labels.astype(np.uint8).tobytes()
    write_bytes(images_path, _encode(images_path, images))
    write_bytes(labels_path, _encode(labels_path, labels))
