"""Checkpoint container.

Byte layout::

    b"QVCK" | version: u32 LE | header length: u64 LE | JSON header | float32 LE payload

The header maps tensor names to shape and byte offset inside the payload
and carries quantizer states inline, so bit-widths and scales survive a
round trip exactly. Weights are stored as float32; ``created_at`` is the
only field that changes between otherwise identical saves.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from datetime import UTC, datetime
from typing import TYPE_CHECKING, Any

import msgspec
import numpy as np
import structlog

from qvit.config.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from qvit.domain.vit import ModelConfig, VisionTransformer, build_model, named_parameters
from qvit.lib.exceptions import (
    CheckpointMagicError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    FormatError,
    ModelStateError,
)
from qvit.lib.io import read_bytes, write_bytes
from qvit.lib.schema import BaseStruct

if TYPE_CHECKING:
    from pathlib import Path

    from numpy.typing import NDArray

    from .optim import AdamW

__all__ = (
    "Checkpoint",
    "CheckpointHeader",
    "QuantizerRecord",
    "TensorRecord",
    "decode_checkpoint",
    "encode_checkpoint",
    "load_checkpoint",
    "restore_model",
    "restore_optimizer",
    "round_to_checkpoint_precision",
    "save_checkpoint",
    "state_digest",
)

logger = structlog.get_logger()

_PREFIX = struct.Struct("<4sIQ")
_EXP_AVG = "optim.exp_avg."
_EXP_AVG_SQ = "optim.exp_avg_sq."
_SHAPE_FIELDS = ("image_size", "patch_size", "in_channels", "embed_dim", "depth", "heads", "mlp_dim", "num_classes")


class TensorRecord(BaseStruct):
    shape: list[int]
    offset: int
    dtype: str = "float32"

    @property
    def nbytes(self) -> int:
        return 4 * int(np.prod(self.shape, dtype=np.int64))


class QuantizerRecord(BaseStruct):
    name: str
    b_tilde: float
    scales: list[float]
    frozen_bit: int | None
    enabled: bool


class OptimizerRecord(BaseStruct):
    lr: float
    total_steps: int
    step_count: int
    betas: tuple[float, float]
    eps: float
    weight_decay: float


class CheckpointHeader(BaseStruct):
    created_at: str
    model: dict[str, Any]
    quant_mode: str
    epoch: int
    stage: str
    rng: dict[str, int]
    tensors: dict[str, TensorRecord]
    quantizers: list[QuantizerRecord]
    optimizer: OptimizerRecord | None = None
    metrics: dict[str, float] = msgspec.field(default_factory=dict)


@dataclass
class Checkpoint:
    header: CheckpointHeader
    arrays: dict[str, NDArray[np.float32]]

    @property
    def config(self) -> ModelConfig:
        return ModelConfig.model_validate(self.header.model)


def round_to_checkpoint_precision(model: VisionTransformer) -> None:
    """Round every float parameter to float32 in place, as a save would."""
    for _, tensor in named_parameters(model):
        tensor.data[...] = tensor.data.astype(np.float32).astype(np.float64)


def encode_checkpoint(
    model: VisionTransformer,
    *,
    epoch: int,
    stage: str,
    seed: int,
    optimizer: AdamW | None = None,
    metrics: dict[str, float] | None = None,
) -> bytes:
    arrays: dict[str, NDArray[np.float32]] = {
        name: tensor.data.astype("<f4") for name, tensor in named_parameters(model)
    }
    opt_record = None
    if optimizer is not None:
        arrays.update({_EXP_AVG + k: v.astype("<f4") for k, v in optimizer.exp_avg.items()})
        arrays.update({_EXP_AVG_SQ + k: v.astype("<f4") for k, v in optimizer.exp_avg_sq.items()})
        opt_record = OptimizerRecord(
            lr=optimizer.lr,
            total_steps=optimizer.total_steps,
            step_count=optimizer.step_count,
            betas=optimizer.betas,
            eps=optimizer.eps,
            weight_decay=optimizer.weight_decay,
        )
    tensors, offset = {}, 0
    for name, array in arrays.items():
        tensors[name] = TensorRecord(shape=list(array.shape), offset=offset)
        offset += array.nbytes
    header = CheckpointHeader(
        created_at=datetime.now(UTC).isoformat(),
        model=model.config.model_dump(mode="json"),
        quant_mode=model.quant_mode,
        epoch=epoch,
        stage=stage,
        rng={"seed": seed, "epoch": epoch},
        tensors=tensors,
        quantizers=[
            QuantizerRecord(
                name=state.name,
                b_tilde=state.b_tilde.item(),
                scales=state.scales.data.tolist(),
                frozen_bit=state.frozen_bit,
                enabled=state.enabled,
            )
            for state in model.quantizers()
        ],
        optimizer=opt_record,
        metrics=dict(metrics or {}),
    )
    header_bytes = msgspec.json.encode(header)
    payload = b"".join(array.tobytes() for array in arrays.values())
    return _PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes)) + header_bytes + payload


def save_checkpoint(path: Path | str, model: VisionTransformer, **kwargs: Any) -> None:
    write_bytes(path, encode_checkpoint(model, **kwargs))
    logger.info("checkpoint_saved", path=str(path), epoch=kwargs.get("epoch"))


def decode_checkpoint(raw: bytes, source: str = "<bytes>") -> Checkpoint:
    """Parse and verify a checkpoint container.

    Raises:
        CheckpointMagicError: the data does not start with ``QVCK``.
        CheckpointVersionError: unsupported format version.
        CheckpointTruncatedError: header or payload shorter than declared.
        FormatError: the header is not a valid document, or trailing bytes follow the payload.
    """
    if raw[:4] != CHECKPOINT_MAGIC:
        msg = f"{source}: not a checkpoint (magic {raw[:4]!r})"
        raise CheckpointMagicError(msg)
    if len(raw) < _PREFIX.size:
        msg = f"{source}: checkpoint prefix is truncated"
        raise CheckpointTruncatedError(msg)
    _, version, header_len = _PREFIX.unpack_from(raw)
    if version != CHECKPOINT_VERSION:
        msg = f"{source}: checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})"
        raise CheckpointVersionError(msg)
    body = _PREFIX.size + header_len
    if len(raw) < body:
        msg = f"{source}: header declares {header_len} bytes, only {len(raw) - _PREFIX.size} present"
        raise CheckpointTruncatedError(msg)
    header = CheckpointHeader.from_json(raw[_PREFIX.size : body], source)
    payload = memoryview(raw)[body:]
    expected = max((rec.offset + rec.nbytes for rec in header.tensors.values()), default=0)
    if len(payload) < expected:
        msg = f"{source}: payload holds {len(payload)} bytes, header declares {expected}"
        raise CheckpointTruncatedError(msg)
    if len(payload) > expected:
        msg = f"{source}: {len(payload) - expected} trailing bytes after the payload"
        raise FormatError(msg)
    arrays = {
        name: np.frombuffer(payload, dtype="<f4", count=rec.nbytes // 4, offset=rec.offset).reshape(rec.shape)
        for name, rec in header.tensors.items()
    }
    return Checkpoint(header=header, arrays=arrays)


def load_checkpoint(path: Path | str) -> Checkpoint:
    return decode_checkpoint(read_bytes(path), str(path))


def restore_model(ckpt: Checkpoint, config: ModelConfig | None = None) -> VisionTransformer:
    """Rebuild the model stored in ``ckpt``.

    With ``config`` only the float weights are taken and the quantizers start
    fresh in ``config.quant_mode``; it may change quantization settings but
    not the architecture.

    Raises:
        ModelStateError: architecture mismatch, or a tensor or quantizer is missing.
    """
    stored = ckpt.config
    if config is not None:
        differing = [f for f in _SHAPE_FIELDS if getattr(config, f) != getattr(stored, f)]
        if differing:
            msg = f"checkpoint architecture differs from the config in {', '.join(differing)}"
            raise ModelStateError(msg)
    model = build_model(config or stored)
    for name, tensor in named_parameters(model):
        array = ckpt.arrays.get(name)
        if array is None or array.shape != tensor.shape:
            found = None if array is None else array.shape
            msg = f"checkpoint tensor {name}: expected shape {tensor.shape}, found {found}"
            raise ModelStateError(msg)
        tensor.data[...] = array.astype(np.float64)
    if config is None:
        records = {record.name: record for record in ckpt.header.quantizers}
        for state in model.quantizers():
            record = records.get(state.name)
            if record is None:
                msg = f"checkpoint has no state for quantizer {state.name}"
                raise ModelStateError(msg)
            state.b_tilde.data[...] = record.b_tilde
            state.scales.data[...] = record.scales
            state.frozen_bit = record.frozen_bit
            state.enabled = record.enabled
        model.quant_mode = ckpt.header.quant_mode  # type: ignore[assignment]
    return model


def restore_optimizer(ckpt: Checkpoint, optimizer: AdamW) -> None:
    record = ckpt.header.optimizer
    if record is None:
        return
    optimizer.step_count = record.step_count
    for name, array in ckpt.arrays.items():
        if name.startswith(_EXP_AVG_SQ):
            optimizer.exp_avg_sq[name.removeprefix(_EXP_AVG_SQ)] = array.astype(np.float64)
        elif name.startswith(_EXP_AVG):
            optimizer.exp_avg[name.removeprefix(_EXP_AVG)] = array.astype(np.float64)


def state_digest(model: VisionTransformer) -> str:
    """SHA-256 over parameters and quantizer states."""
    digest = hashlib.sha256()
    for name, tensor in named_parameters(model):
        digest.update(name.encode())
        digest.update(tensor.data.tobytes())
    for state in model.quantizers():
        digest.update(state.name.encode())
        digest.update(state.b_tilde.data.tobytes())
        digest.update(state.scales.data.tobytes())
        digest.update(f"{state.frozen_bit}|{state.enabled}".encode())
    return digest.hexdigest()
