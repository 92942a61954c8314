from __future__ import annotations

from typing import Any, Self

import msgspec

from qvit.lib.exceptions import FormatError


class BaseStruct(msgspec.Struct):
    """Report and header documents; every JSON the CLI writes is one of these."""

    def to_dict(self) -> dict[str, Any]:
        return {f: getattr(self, f) for f in self.__struct_fields__ if getattr(self, f, None) != msgspec.UNSET}

    def to_json(self) -> bytes:
        return msgspec.json.encode(self)

    @classmethod
    def from_json(cls, raw: bytes | str, source: str = "<bytes>") -> Self:
        """Decode and type-check one document.

        Raises:
            FormatError: not JSON, or the wrong shape for ``cls``.
        """
        try:
            return msgspec.json.decode(raw, type=cls)
        except msgspec.DecodeError as e:
            msg = f"{source}: malformed {cls.__name__}: {e}"
            raise FormatError(msg) from e
