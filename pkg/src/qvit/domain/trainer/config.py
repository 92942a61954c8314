from __future__ import annotations

from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from qvit.config.constants import BIT_MAX, BIT_MIN
from qvit.domain.data import DataSpec
from qvit.domain.vit import ModelConfig
from qvit.lib.exceptions import ConfigValidationError
from qvit.lib.io import read_bytes

__all__ = ("RunConfig", "TrainConfig", "load_run_config")


class TrainConfig(BaseModel):
    """Optimization and search hyperparameters."""

    model_config = ConfigDict(extra="forbid")

    constraint_bits: int = Field(4, ge=BIT_MIN, le=BIT_MAX, description="N of the N-bit BitOPs budget")
    eta: float = Field(0.1, ge=0, description="Weight of the budget penalty")
    sigma: float = Field(0.9, ge=0, le=1, description="Fraction of epochs spent searching bit-widths")
    epochs: int = Field(60, ge=0)
    batch_size: int = Field(64, gt=0)
    eval_batch_size: int = Field(256, gt=0)
    lr_weights: float = Field(1e-3, gt=0)
    lr_quant: float = Field(1e-2, gt=0, description="Plain gradient-descent step for bit-widths and scales")
    weight_decay: float = Field(0.05, ge=0)
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = Field(1e-8, gt=0)
    seed: int = Field(0, ge=0)
    calibration_batches: int = Field(1, gt=0, description="Training batches used to calibrate activation scales")
    penalty_normalization: Literal["mean_bit_product", "gbitops"] = "mean_bit_product"

    @property
    def search_epochs(self) -> int:
        return round(self.sigma * self.epochs)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelConfig = Field(default_factory=ModelConfig.toy)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataSpec = Field(default_factory=DataSpec)


def load_run_config(path: Path | str | None) -> RunConfig:
    """Read a JSON run configuration; ``None`` gives the toy defaults.

    Raises:
        FileAccessError: the file cannot be read.
        ConfigValidationError: the document is not valid JSON or violates the schema.
    """
    if path is None:
        return RunConfig()
    raw = read_bytes(path)
    try:
        return RunConfig.model_validate_json(raw)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        msg = f"{Path(path)}: {problems}"
        raise ConfigValidationError(msg) from e
