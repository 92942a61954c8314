from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from qvit.config.constants import SYNTHETIC_NOISE
from qvit.lib.exceptions import ConfigValidationError, ModelStateError

from .dataset import Dataset, gen_synthetic
from .idx import load_idx

if TYPE_CHECKING:
    from qvit.domain.vit import ModelConfig

__all__ = ("DataSpec", "Split", "load_split")

Split = Literal["train", "eval"]

_ALIASES = {"images": "train_images", "labels": "train_labels", "count": "train_count"}


class DataSpec(BaseModel):
    """Where a run's train and eval splits come from."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["synthetic", "idx"] = "synthetic"
    seed: int = Field(0, ge=0, description="Template and sample seed of synthetic data")
    train_count: int = Field(2048, gt=0)
    eval_count: int = Field(512, gt=0)
    noise: float = Field(SYNTHETIC_NOISE, ge=0)
    train_images: Path | None = None
    train_labels: Path | None = None
    eval_images: Path | None = Field(None, description="Defaults to the training files")
    eval_labels: Path | None = None

    @model_validator(mode="after")
    def _check_idx_paths(self) -> Self:
        if self.kind == "idx" and (self.train_images is None or self.train_labels is None):
            msg = "idx data needs both images and labels paths"
            raise ValueError(msg)
        if (self.eval_images is None) != (self.eval_labels is None):
            msg = "eval_images and eval_labels must be given together"
            raise ValueError(msg)
        return self

    @classmethod
    def parse(cls, text: str) -> DataSpec:
        """Parse ``synthetic[:key=value,...]`` or ``idx:images=<path>,labels=<path>[,...]``.

        Raises:
            ConfigValidationError: unknown kind or key, or a bad value.
        """
        kind, _, rest = text.partition(":")
        values: dict[str, str] = {"kind": kind.strip()}
        for item in filter(None, (part.strip() for part in rest.split(","))):
            key, sep, value = item.partition("=")
            if not sep:
                msg = f"data spec item {item!r} is not key=value"
                raise ConfigValidationError(msg)
            values[_ALIASES.get(key.strip(), key.strip())] = value.strip()
        try:
            return cls.model_validate(values)
        except ValidationError as e:
            msg = f"invalid data spec {text!r}: {e.errors()[0]['msg']}"
            raise ConfigValidationError(msg) from e


def load_split(spec: DataSpec, config: ModelConfig, split: Split) -> Dataset:
    """Materialize one split and check it fits the model."""
    if spec.kind == "synthetic":
        count = spec.train_count if split == "train" else spec.eval_count
        return gen_synthetic(spec.seed, count, config, split=split, noise=spec.noise)
    images, labels = spec.train_images, spec.train_labels
    if split == "eval" and spec.eval_images is not None:
        images, labels = spec.eval_images, spec.eval_labels
    dataset = load_idx(images, labels, num_classes=config.num_classes, split=split)  # type: ignore[arg-type]
    expected = (config.in_channels, config.image_size, config.image_size)
    if dataset.images.shape[1:] != expected:
        msg = f"{split} images have shape {dataset.images.shape[1:]}, the model expects {expected}"
        raise ModelStateError(msg)
    return dataset
