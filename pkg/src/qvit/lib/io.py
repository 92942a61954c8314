"""Report writers: CSV with fixed column order and newline-delimited JSON."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import TYPE_CHECKING, Any

import msgspec

from qvit.lib.exceptions import FileAccessError

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

__all__ = ("append_jsonl", "csv_text", "read_bytes", "read_csv", "write_bytes", "write_csv", "write_text")

_encoder = msgspec.json.Encoder()


def read_bytes(path: Path | str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        msg = f"cannot read {path}: {e.strerror or e}"
        raise FileAccessError(msg) from e


def write_bytes(path: Path | str, payload: bytes) -> None:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(payload)
    except OSError as e:
        msg = f"cannot write {path}: {e.strerror or e}"
        raise FileAccessError(msg) from e


def write_text(path: Path | str, text: str) -> None:
    write_bytes(path, text.encode())


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    write_text(path, csv_text(header, rows))


def read_csv(path: Path | str) -> list[dict[str, str]]:
    text = read_bytes(path).decode("utf-8", errors="replace")
    return list(csv.DictReader(io.StringIO(text)))


def append_jsonl(path: Path | str, record: Any) -> None:
    """Append one JSON document and a newline."""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("ab") as fh:
            fh.write(_encoder.encode(record) + b"\n")
    except OSError as e:
        msg = f"cannot append to {path}: {e.strerror or e}"
        raise FileAccessError(msg) from e
