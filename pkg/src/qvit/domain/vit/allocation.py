"""Bit allocation files and per-layer summaries."""

from __future__ import annotations

import re
from typing import TYPE_CHECKING

import numpy as np

from qvit.lib.exceptions import AllocationFormatError
from qvit.lib.io import read_csv, write_csv
from qvit.lib.schema import BaseStruct

from .model import BitAllocation, quantizer_role

if TYPE_CHECKING:
    from collections.abc import Mapping
    from pathlib import Path

__all__ = (
    "ALLOCATION_COLUMNS",
    "SUMMARY_COLUMNS",
    "RoleSummary",
    "allocation_rows",
    "parse_quantizer_name",
    "read_allocation_csv",
    "summarize_allocation",
    "summary_rows",
    "write_allocation_csv",
)

ALLOCATION_COLUMNS = ("name", "layer", "head", "role", "bit")
SUMMARY_COLUMNS = ("layer", "role", "count", "min", "median", "max", "mean")

_LAYER = re.compile(r"^block(\d+)\.")
_HEAD = re.compile(r"\.head(\d+)(?:\.|$)")


class RoleSummary(BaseStruct):
    layer: int | None
    role: str
    count: int
    min: int
    median: float
    max: int
    mean: float


def parse_quantizer_name(name: str) -> tuple[int | None, int | None]:
    """``(layer, head)`` of a quantizer; ``None`` where the name has no such part."""
    layer = _LAYER.match(name)
    head = _HEAD.search(name)
    return (int(layer.group(1)) if layer else None, int(head.group(1)) if head else None)


def _cell(value: int | None) -> str | int:
    return "" if value is None else value


def allocation_rows(alloc: Mapping[str, int]) -> list[tuple[str, str | int, str | int, str, int]]:
    rows = []
    for name, bit in alloc.items():
        layer, head = parse_quantizer_name(name)
        rows.append((name, _cell(layer), _cell(head), str(quantizer_role(name)), int(bit)))
    return rows


def write_allocation_csv(path: Path | str, alloc: Mapping[str, int]) -> None:
    write_csv(path, ALLOCATION_COLUMNS, allocation_rows(alloc))


def read_allocation_csv(path: Path | str) -> BitAllocation:
    """Read ``name`` and ``bit`` columns; other columns are informational."""
    rows = read_csv(path)
    if not rows or "name" not in rows[0] or "bit" not in rows[0]:
        msg = f"{path}: allocation CSV needs at least the columns 'name' and 'bit'"
        raise AllocationFormatError(msg)
    alloc: BitAllocation = {}
    for line, row in enumerate(rows, start=2):
        name, raw = (row.get("name") or "").strip(), (row.get("bit") or "").strip()
        if not name or name in alloc:
            msg = f"{path}:{line}: missing or duplicate quantizer name {name!r}"
            raise AllocationFormatError(msg)
        try:
            alloc[name] = int(raw)
        except ValueError as e:
            msg = f"{path}:{line}: bit {raw!r} is not an integer"
            raise AllocationFormatError(msg) from e
    return alloc


def summarize_allocation(alloc: Mapping[str, int]) -> list[RoleSummary]:
    """Bit statistics per layer and quantizer role, in allocation order."""
    groups: dict[tuple[int | None, str], list[int]] = {}
    for name, bit in alloc.items():
        layer, _ = parse_quantizer_name(name)
        groups.setdefault((layer, str(quantizer_role(name))), []).append(int(bit))
    summaries = []
    for (layer, role), bits in groups.items():
        values = np.asarray(bits, dtype=np.float64)
        summaries.append(
            RoleSummary(
                layer=layer,
                role=role,
                count=len(bits),
                min=min(bits),
                median=float(np.median(values)),
                max=max(bits),
                mean=float(values.mean()),
            )
        )
    return summaries


def summary_rows(summaries: list[RoleSummary]) -> list[tuple[object, ...]]:
    return [(_cell(s.layer), s.role, s.count, s.min, s.median, s.max, s.mean) for s in summaries]
