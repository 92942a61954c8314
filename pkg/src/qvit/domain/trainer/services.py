"""Float pretraining, two-stage quantization-aware training and evaluation."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import structlog

from qvit.config import get_settings
from qvit.config.constants import BIT_MAX, FIRST_LAST_INIT_BITS
from qvit.domain.autodiff import add, backward, cross_entropy, recording
from qvit.domain.bitops import continuous_bitops, model_bitops, normalizer, penalty, uniform_budget
from qvit.domain.data import Dataset, batches, load_split
from qvit.domain.quant import capturing, init_scales
from qvit.domain.vit import (
    VisionTransformer,
    build_model,
    forward_model,
    get_allocation,
    is_boundary_quantizer,
    named_parameters,
    weight_of,
    write_allocation_csv,
)
from qvit.lib.io import append_jsonl
from qvit.lib.rundir import locked_run_dir

from .checkpoint import restore_model, round_to_checkpoint_precision, save_checkpoint
from .optim import AdamW, QuantizerDescent, zero_grads
from .schemas import EpochMetrics

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from qvit.domain.quant import QuantizerState

    from .checkpoint import Checkpoint
    from .config import RunConfig, TrainConfig

__all__ = (
    "RunResult",
    "calibrate_ptq",
    "calibrate_scales",
    "calibration_images",
    "evaluate",
    "freeze_bits",
    "init_qat",
    "load_datasets",
    "pretrain_float",
    "train_qat",
)

logger = structlog.get_logger()


@dataclass
class RunResult:
    model: VisionTransformer
    history: list[EpochMetrics] = field(default_factory=list)
    final_accuracy: float = 0.0
    checkpoint: Path | None = None


def load_datasets(run: RunConfig) -> tuple[Dataset, Dataset]:
    return load_split(run.data, run.model, "train"), load_split(run.data, run.model, "eval")


def evaluate(model: VisionTransformer, dataset: Dataset, batch_size: int = 256, workers: int | None = None) -> float:
    """Top-1 accuracy. Batches may be scored on worker threads; counts are summed in batch order."""
    if len(dataset) == 0:
        return 0.0
    chunks = list(batches(dataset, batch_size, shuffle=False))

    def correct(chunk: tuple[NDArray[np.float64], NDArray[np.int64]]) -> int:
        images, labels = chunk
        logits = forward_model(model, images)
        return int((np.argmax(logits.data, axis=-1) == labels).sum())

    workers = workers or get_settings().run.NUM_EVAL_WORKERS
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(correct, chunks))
    else:
        counts = [correct(chunk) for chunk in chunks]
    return sum(counts) / len(dataset)


def freeze_bits(model: VisionTransformer) -> None:
    """Fix every quantizer at its discretized bit-width."""
    for state in model.quantizers():
        if state.frozen_bit is None:
            state.freeze()


def calibration_images(dataset: Dataset, train: TrainConfig) -> NDArray[np.float64]:
    """The first ``calibration_batches`` training batches, in dataset order."""
    return dataset.images[: train.calibration_batches * train.batch_size]


def calibrate_scales(model: VisionTransformer, images: NDArray[np.float64]) -> None:
    """MSE-initialize all seven scales of every quantizer.

    Weight quantizers use their full weight tensor; activation quantizers use
    what reaches them during one float-mode forward pass over ``images``.
    Heads sharing layer-wise scales are calibrated on their pooled samples.
    """
    states = model.quantizers()
    enabled = [state.enabled for state in states]
    for state in states:
        state.enabled = False
    try:
        with capturing() as captured:
            forward_model(model, images)
    finally:
        for state, flag in zip(states, enabled, strict=True):
            state.enabled = flag
    weights = weight_of(model)
    pooled: dict[int, tuple[QuantizerState, list[NDArray[np.float64]]]] = {}
    for state in states:
        samples = [weights[state.name].data] if state.name in weights else captured.get(state.name, [])
        pooled.setdefault(id(state.scales), (state, []))[1].extend(samples)
    for state, samples in pooled.values():
        init_scales(state, samples)
    logger.info("scales_calibrated", quantizers=len(states), images=len(images))


def calibrate_ptq(model: VisionTransformer, images: NDArray[np.float64], bits: int = BIT_MAX) -> None:
    """Post-training quantization: every quantizer fixed at ``bits``, scales from calibration."""
    for state in model.quantizers():
        state.enabled = True
        state.b_tilde.data[...] = float(bits)
        state.freeze(bits)
    model.quant_mode = "uniform"
    calibrate_scales(model, images)


def init_qat(ckpt: Checkpoint, run: RunConfig, calibration: NDArray[np.float64]) -> VisionTransformer:
    """Quantized model initialized from float weights.

    Learned mode starts interior bits at ``N + 1`` and the first and last
    layer at 8, all still learnable; uniform mode pins ``uniform_bits``.
    """
    config = run.model
    if config.quant_mode == "float":
        config = config.model_copy(update={"quant_mode": "learned"})
    model = restore_model(ckpt, config)
    if config.quant_mode == "learned":
        interior = float(min(run.train.constraint_bits + 1, BIT_MAX))
        for state in model.quantizers():
            state.b_tilde.data[...] = float(FIRST_LAST_INIT_BITS) if is_boundary_quantizer(state.name) else interior
    calibrate_scales(model, calibration)
    return model


def pretrain_float(
    run: RunConfig,
    train_ds: Dataset,
    eval_ds: Dataset,
    run_dir: Path | str | None = None,
) -> RunResult:
    config = run.model.model_copy(update={"quant_mode": "float"})
    model = build_model(config, seed=run.train.seed)
    return _fit(model, run.train, train_ds, eval_ds, run_dir, search_epochs=0)


def train_qat(
    model: VisionTransformer,
    run: RunConfig,
    train_ds: Dataset,
    eval_ds: Dataset,
    run_dir: Path | str | None = None,
) -> RunResult:
    """Search bit-widths for ``round(sigma * epochs)`` epochs, then freeze them and keep training."""
    return _fit(model, run.train, train_ds, eval_ds, run_dir, search_epochs=run.train.search_epochs)


def _fit(
    model: VisionTransformer,
    train: TrainConfig,
    train_ds: Dataset,
    eval_ds: Dataset,
    run_dir: Path | str | None,
    search_epochs: int,
) -> RunResult:
    if run_dir is None:
        return _train_loop(model, train, train_ds, eval_ds, None, search_epochs)
    with locked_run_dir(run_dir) as root:
        structlog.contextvars.bind_contextvars(run_dir=str(root))
        try:
            (root / get_settings().run.METRICS_FILENAME).unlink(missing_ok=True)
            return _train_loop(model, train, train_ds, eval_ds, root, search_epochs)
        finally:
            structlog.contextvars.unbind_contextvars("run_dir", "stage")


def _train_loop(
    model: VisionTransformer,
    train: TrainConfig,
    train_ds: Dataset,
    eval_ds: Dataset,
    root: Path | None,
    search_epochs: int,
) -> RunResult:
    settings = get_settings().run
    steps_per_epoch = math.ceil(len(train_ds) / train.batch_size)
    adamw = AdamW(
        lr=train.lr_weights,
        total_steps=train.epochs * steps_per_epoch,
        betas=train.betas,
        eps=train.eps,
        weight_decay=train.weight_decay,
    )
    quantized = model.quant_mode != "float"
    learned = model.quant_mode == "learned"
    quant_opt = QuantizerDescent(train.lr_quant) if quantized else None
    budget = uniform_budget(model.config, train.constraint_bits) if quantized else None
    budget_norm = budget / normalizer(model.config, train.penalty_normalization) if budget is not None else 0.0
    result = RunResult(model=model)

    for epoch in range(train.epochs):
        searching = learned and epoch < search_epochs
        if learned and not searching and any(s.frozen_bit is None for s in model.quantizers()):
            freeze_bits(model)
            logger.info("bits_frozen", epoch=epoch, allocation_size=len(model.quantizers()))
        stage = "float" if not quantized else ("search" if searching else "dive")
        structlog.contextvars.bind_contextvars(stage=stage)
        lr = adamw.current_lr
        loss, accuracy, penalty_value = _train_epoch(
            model, train_ds, train, epoch, adamw, quant_opt, searching, budget_norm
        )
        allocation = get_allocation(model) if quantized else None
        metrics = EpochMetrics(
            epoch=epoch,
            stage=stage,
            train_loss=loss,
            train_accuracy=accuracy,
            eval_accuracy=evaluate(model, eval_ds, train.eval_batch_size),
            lr=lr,
            bitops=model_bitops(model.config, allocation).total if allocation else None,
            budget=budget,
            penalty=penalty_value if quantized else None,
            allocation=allocation,
        )
        result.history.append(metrics)
        logger.info(
            "epoch_completed",
            epoch=epoch,
            loss=round(loss, 6),
            train_accuracy=accuracy,
            eval_accuracy=metrics.eval_accuracy,
            bitops=metrics.bitops,
        )
        if root is not None:
            append_jsonl(root / settings.METRICS_FILENAME, metrics)
            if allocation is not None:
                write_allocation_csv(root / settings.ALLOCATION_DIR / f"epoch{epoch:03d}.csv", allocation)

    if learned:
        freeze_bits(model)
    round_to_checkpoint_precision(model)
    result.final_accuracy = evaluate(model, eval_ds, train.eval_batch_size)
    final: dict[str, float] = {"eval_accuracy": result.final_accuracy}
    if quantized:
        final["bitops"] = model_bitops(model.config, get_allocation(model)).total
    logger.info("run_completed", **final)
    if root is not None:
        result.checkpoint = root / settings.CHECKPOINT_FILENAME
        save_checkpoint(
            result.checkpoint,
            model,
            epoch=train.epochs,
            stage="float" if not quantized else "final",
            seed=train.seed,
            optimizer=adamw,
            metrics=final,
        )
    return result


def _train_epoch(
    model: VisionTransformer,
    dataset: Dataset,
    train: TrainConfig,
    epoch: int,
    adamw: AdamW,
    quant_opt: QuantizerDescent | None,
    searching: bool,
    budget: float,
) -> tuple[float, float, float]:
    """One pass over ``dataset``; returns mean loss, accuracy and mean penalty."""
    params = named_parameters(model)
    states = model.quantizers()
    quant_tensors = [t for state in states for t in (state.b_tilde, state.scales)]
    loss_sum = penalty_sum = 0.0
    correct = steps = 0
    for images, labels in batches(dataset, train.batch_size, seed=[train.seed, epoch]):
        zero_grads(tensor for _, tensor in params)
        zero_grads(quant_tensors)
        with recording():
            logits = forward_model(model, images)
            objective = loss = cross_entropy(logits, labels)
            if searching:
                pen = penalty(continuous_bitops(model, train.penalty_normalization), budget, train.eta)
                objective = add(loss, pen)
                penalty_sum += pen.item()
        backward(objective)
        adamw.step(params)
        if quant_opt is not None:
            quant_opt.step(states, update_bits=searching)
        loss_sum += loss.item() * len(labels)
        correct += int((np.argmax(logits.data, axis=-1) == labels).sum())
        steps += 1
    count = max(len(dataset), 1)
    return loss_sum / count, correct / count, penalty_sum / max(steps, 1)
