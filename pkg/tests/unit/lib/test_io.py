from __future__ import annotations

import json
from typing import TYPE_CHECKING

import pytest

from qvit.lib.exceptions import FileAccessError, RunDirectoryLockedError
from qvit.lib.io import append_jsonl, csv_text, read_bytes, read_csv, write_csv
from qvit.lib.rundir import locked_run_dir

if TYPE_CHECKING:
    from pathlib import Path


def test_csv_keeps_column_order(tmp_path: Path) -> None:
    path = tmp_path / "nested" / "rows.csv"
    write_csv(path, ["name", "bit"], [("patch_embed.x", 8), ("block0.mlp.w1", 3)])
    assert path.read_text() == "name,bit\npatch_embed.x,8\nblock0.mlp.w1,3\n"
    assert read_csv(path) == [{"name": "patch_embed.x", "bit": "8"}, {"name": "block0.mlp.w1", "bit": "3"}]


def test_csv_text_header_only() -> None:
    assert csv_text(["a", "b"], []) == "a,b\n"


def test_append_jsonl(tmp_path: Path) -> None:
    path = tmp_path / "metrics.jsonl"
    append_jsonl(path, {"epoch": 0})
    append_jsonl(path, {"epoch": 1})
    assert [json.loads(line) for line in path.read_text().splitlines()] == [{"epoch": 0}, {"epoch": 1}]


def test_read_missing_file(tmp_path: Path) -> None:
    with pytest.raises(FileAccessError, match="cannot read"):
        read_bytes(tmp_path / "absent")


def test_run_dir_lock_is_exclusive(tmp_path: Path) -> None:
    run_dir = tmp_path / "run"
    with locked_run_dir(run_dir) as root:
        assert (root / ".lock").exists()
        with pytest.raises(RunDirectoryLockedError), locked_run_dir(run_dir):
            pass
    assert not (run_dir / ".lock").exists()


def test_run_dir_lock_released_on_error(tmp_path: Path) -> None:
    with pytest.raises(RuntimeError), locked_run_dir(tmp_path) as root:
        assert root == tmp_path
        raise RuntimeError
    assert not (tmp_path / ".lock").exists()


def test_stale_lock_blocks_writer(tmp_path: Path) -> None:
    (tmp_path / ".lock").write_text("123")
    with pytest.raises(RunDirectoryLockedError, match="locked"), locked_run_dir(tmp_path):
        pass
