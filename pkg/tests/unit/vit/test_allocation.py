from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from qvit.domain.vit import (
    ModelConfig,
    parse_quantizer_name,
    quantizer_names,
    read_allocation_csv,
    summarize_allocation,
    write_allocation_csv,
)
from qvit.lib.exceptions import AllocationFormatError

if TYPE_CHECKING:
    from pathlib import Path


@pytest.mark.parametrize(
    ("name", "expected"),
    [
        ("patch_embed.x", (None, None)),
        ("block2.msa.x_in", (2, None)),
        ("block2.msa.w_k.head3", (2, 3)),
        ("block11.msa.head0.attn", (11, 0)),
        ("block0.mlp.gelu", (0, None)),
        ("classifier.w", (None, None)),
    ],
)
def test_parse_quantizer_name(name: str, expected: tuple[int | None, int | None]) -> None:
    assert parse_quantizer_name(name) == expected


def test_csv_round_trip(tmp_path: Path) -> None:
    names = quantizer_names(ModelConfig.toy(depth=2, heads=2))
    alloc = {name: 2 + (i * 5) % 7 for i, name in enumerate(names)}
    path = tmp_path / "alloc.csv"
    write_allocation_csv(path, alloc)
    assert read_allocation_csv(path) == alloc
    lines = path.read_text().splitlines()
    assert lines[0] == "name,layer,head,role,bit"
    assert lines[1].startswith("patch_embed.x,,,activation,")
    assert "block1.msa.head1.attn,1,1,attention_score," in path.read_text()


def test_read_requires_name_and_bit(tmp_path: Path) -> None:
    path = tmp_path / "alloc.csv"
    path.write_text("quantizer,bits\npatch_embed.x,8\n")
    with pytest.raises(AllocationFormatError):
        read_allocation_csv(path)


@pytest.mark.parametrize("body", ["patch_embed.x,four\n", "patch_embed.x,4\npatch_embed.x,5\n", ",4\n"])
def test_read_rejects_bad_rows(tmp_path: Path, body: str) -> None:
    path = tmp_path / "alloc.csv"
    path.write_text("name,bit\n" + body)
    with pytest.raises(AllocationFormatError):
        read_allocation_csv(path)


def test_summary_groups_by_layer_and_role() -> None:
    alloc = {
        "block0.msa.head0.q": 2,
        "block0.msa.head1.q": 4,
        "block0.msa.head2.q": 7,
        "block0.msa.w_q.head0": 3,
        "block1.msa.head0.q": 5,
        "classifier.w": 8,
    }
    summaries = {(s.layer, s.role): s for s in summarize_allocation(alloc)}
    q0 = summaries[(0, "q_embed")]
    assert (q0.count, q0.min, q0.median, q0.max) == (3, 2, 4.0, 7)
    assert q0.mean == pytest.approx(13 / 3)
    assert summaries[(0, "weight")].count == 1
    assert summaries[(1, "q_embed")].median == 5.0
    assert summaries[(None, "weight")].max == 8
    assert list(summaries) == [(0, "q_embed"), (0, "weight"), (1, "q_embed"), (None, "weight")]
