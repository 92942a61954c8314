from __future__ import annotations

import msgspec
import pytest

from qvit.lib.exceptions import FormatError
from qvit.lib.schema import BaseStruct


class _Row(BaseStruct):
    name: str
    bit: int
    note: str | msgspec.UnsetType = msgspec.UNSET


def test_to_dict_skips_unset_fields() -> None:
    assert _Row(name="block0.mlp.w1", bit=4).to_dict() == {"name": "block0.mlp.w1", "bit": 4}
    assert _Row(name="a", bit=2, note="frozen").to_dict()["note"] == "frozen"


def test_to_json() -> None:
    assert _Row(name="classifier.w", bit=8).to_json() == b'{"name":"classifier.w","bit":8}'


def test_from_json() -> None:
    assert _Row.from_json(b'{"name":"patch_embed.x","bit":8}') == _Row(name="patch_embed.x", bit=8)


@pytest.mark.parametrize("raw", [b"{not json", b'{"name":"a","bit":"four"}', b'{"bit":4}'])
def test_from_json_rejects_malformed(raw: bytes) -> None:
    with pytest.raises(FormatError, match="run.json: malformed _Row"):
        _Row.from_json(raw, "run.json")
