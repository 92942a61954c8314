from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any

import click

from qvit.lib.exceptions import ApplicationError

if TYPE_CHECKING:
    from rich.console import Console

    from qvit.domain.data import DataSpec

__all__ = ("qvit_group",)

# existence is left to the loaders: FileAccessError, exit 3
_PATH = click.Path(path_type=Path)


class ApplicationGroup(click.Group):
    """Command group that turns application errors into exit codes."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except ApplicationError as exc:
            from qvit.config import get_settings

            if get_settings().app.DEBUG:
                raise
            click.echo(f"error: {exc}", err=True)
            ctx.exit(exc.exit_code)


def _console() -> Console:
    """Console on stderr; stdout carries only JSON."""
    from rich.console import Console

    return Console(stderr=True)


def _echo_json(payload: Any) -> None:
    import msgspec

    click.echo(msgspec.json.encode(payload).decode())


def _data_spec(text: str | None) -> DataSpec:
    from qvit.domain.data import DataSpec

    return DataSpec() if text is None else DataSpec.parse(text)


data_option = click.option(
    "--data",
    "data_text",
    help="Data spec: synthetic[:key=value,...] or idx:images=<path>,labels=<path>",
    type=click.STRING,
    required=False,
    show_default=False,
)


@click.group(name="qvit", cls=ApplicationGroup, help="Mixed-precision quantization-aware training for ViTs.")
@click.option("--log-level", type=click.INT, default=None, help="Stdlib log level (overrides LOG_LEVEL)")
def qvit_group(log_level: int | None) -> None:
    """Configure logging for every subcommand."""
    from qvit.config import configure_logging

    configure_logging(level=log_level)


@qvit_group.command(name="pretrain", help="Train the float model used to initialize QAT.")
@click.option("--config", "config_path", type=_PATH, required=False, help="JSON run config (toy defaults if absent)")
@click.option("--out", "out_dir", type=_PATH, required=True, help="Run directory")
@data_option
def pretrain(config_path: Path | None, out_dir: Path, data_text: str | None) -> None:
    from qvit.domain.trainer import load_datasets, load_run_config, pretrain_float

    console = _console()
    run = load_run_config(config_path)
    if data_text is not None:
        run = run.model_copy(update={"data": _data_spec(data_text)})
    console.rule("Float pretraining")
    train_ds, eval_ds = load_datasets(run)
    result = pretrain_float(run, train_ds, eval_ds, out_dir)
    _echo_json({"checkpoint": str(result.checkpoint), "eval_accuracy": result.final_accuracy})


@qvit_group.command(name="train", help="Two-stage quantization-aware training from a float checkpoint.")
@click.option("--config", "config_path", type=_PATH, required=False, help="JSON run config (toy defaults if absent)")
@click.option("--init", "init_path", type=_PATH, required=True, help="Float checkpoint")
@click.option("--out", "out_dir", type=_PATH, required=True, help="Run directory")
@data_option
def train(config_path: Path | None, init_path: Path, out_dir: Path, data_text: str | None) -> None:
    from qvit.domain.trainer import (
        calibration_images,
        init_qat,
        load_checkpoint,
        load_datasets,
        load_run_config,
        train_qat,
    )

    console = _console()
    run = load_run_config(config_path)
    if data_text is not None:
        run = run.model_copy(update={"data": _data_spec(data_text)})
    console.rule(f"QAT under a {run.train.constraint_bits}-bit BitOPs budget")
    train_ds, eval_ds = load_datasets(run)
    model = init_qat(load_checkpoint(init_path), run, calibration_images(train_ds, run.train))
    result = train_qat(model, run, train_ds, eval_ds, out_dir)
    last = result.history[-1] if result.history else None
    _echo_json(
        {
            "checkpoint": str(result.checkpoint),
            "eval_accuracy": result.final_accuracy,
            "bitops": last.bitops if last else None,
            "budget": last.budget if last else None,
        }
    )


@qvit_group.command(name="eval", help="Top-1 accuracy of a checkpoint.")
@click.option("--ckpt", "ckpt_path", type=_PATH, required=True, help="Checkpoint file")
@click.option("--batch-size", type=click.INT, default=256, show_default=True)
@data_option
def evaluate_checkpoint(ckpt_path: Path, batch_size: int, data_text: str | None) -> None:
    from qvit.domain.data import load_split
    from qvit.domain.trainer import evaluate, load_checkpoint, restore_model

    model = restore_model(load_checkpoint(ckpt_path))
    dataset = load_split(_data_spec(data_text), model.config, "eval")
    _echo_json({"accuracy": evaluate(model, dataset, batch_size), "count": len(dataset)})


def _ptq_model(ckpt_path: Path, data_text: str | None, calibration_batches: int, batch_size: int) -> tuple[Any, Any]:
    """8-bit PTQ model from a checkpoint plus the eval split."""
    from qvit.domain.data import load_split
    from qvit.domain.trainer import calibrate_ptq, load_checkpoint, restore_model

    model = restore_model(load_checkpoint(ckpt_path))
    spec = _data_spec(data_text)
    calibration = load_split(spec, model.config, "train").images[: calibration_batches * batch_size]
    calibrate_ptq(model, calibration)
    return model, load_split(spec, model.config, "eval")


calibration_option = click.option(
    "--calibration-batches", type=click.INT, default=1, show_default=True, help="Batches of 64 used for PTQ scales"
)


@qvit_group.command(name="probe-heads", help="Accuracy drop when each head of one layer goes low-bit.")
@click.option("--ckpt", "ckpt_path", type=_PATH, required=True, help="Checkpoint file")
@click.option("--layer", type=click.INT, required=True, help="Transformer block index")
@click.option("--bits", type=click.IntRange(2, 8), default=2, show_default=True)
@calibration_option
@data_option
def probe_heads(ckpt_path: Path, layer: int, bits: int, calibration_batches: int, data_text: str | None) -> None:
    from qvit.domain.trainer import probe_head_sensitivity

    model, dataset = _ptq_model(ckpt_path, data_text, calibration_batches, 64)
    _echo_json(probe_head_sensitivity(model, dataset, layer, bits))


@qvit_group.command(name="probe-mlp", help="Accuracy with GELU outputs and/or FC weights quantized low.")
@click.option("--ckpt", "ckpt_path", type=_PATH, required=True, help="Checkpoint file")
@click.option("--bits", type=click.IntRange(2, 8), default=2, show_default=True)
@click.option("--baseline", type=click.Choice(["float", "ptq8"]), default="float", show_default=True)
@calibration_option
@data_option
def probe_mlp(ckpt_path: Path, bits: int, baseline: str, calibration_batches: int, data_text: str | None) -> None:
    from qvit.domain.trainer import probe_mlp_components

    model, dataset = _ptq_model(ckpt_path, data_text, calibration_batches, 64)
    _echo_json(probe_mlp_components(model, dataset, bits, baseline))  # type: ignore[arg-type]


@qvit_group.command(name="bitops", help="Static BitOPs report for an architecture and allocation.")
@click.option("--arch", required=True, help="toy, deit-t, deit-s or a ModelConfig JSON file")
@click.option("--uniform", type=click.IntRange(2, 8), default=None, help="Interior bit-width, first/last at 8")
@click.option("--alloc", "alloc_path", type=_PATH, default=None, help="Allocation CSV (name, bit)")
@click.option("--budget-bits", type=click.IntRange(2, 8), default=None, help="Compare against the N-bit budget")
@click.option("--csv", "csv_path", type=_PATH, default=None, help="Also write per-matmul entries as CSV")
def bitops(
    arch: str,
    uniform: int | None,
    alloc_path: Path | None,
    budget_bits: int | None,
    csv_path: Path | None,
) -> None:
    from qvit.domain.bitops import ENTRY_COLUMNS, entry_rows, model_bitops, uniform_allocation, uniform_budget
    from qvit.domain.vit import read_allocation_csv
    from qvit.lib.io import write_csv

    if (uniform is None) == (alloc_path is None):
        msg = "give exactly one of --uniform and --alloc"
        raise click.UsageError(msg)
    config = _arch_config(arch)
    alloc = uniform_allocation(config, uniform) if uniform is not None else read_allocation_csv(alloc_path)  # type: ignore[arg-type]
    budget = uniform_budget(config, budget_bits) if budget_bits is not None else None
    report = model_bitops(config, alloc, budget=budget)
    if csv_path is not None:
        write_csv(csv_path, ENTRY_COLUMNS, entry_rows(report))
    _console().print(f"total: {report.total_g:.3f} GBitOPs over {len(report.entries)} matmuls")
    _echo_json(report)


def _arch_config(arch: str) -> Any:
    from pydantic import ValidationError

    from qvit.domain.vit import ARCH_PRESETS, ModelConfig
    from qvit.lib.exceptions import ConfigValidationError
    from qvit.lib.io import read_bytes

    if arch in ARCH_PRESETS:
        return ARCH_PRESETS[arch]()
    if not Path(arch).is_file():
        msg = f"unknown architecture {arch!r}; use one of {', '.join(ARCH_PRESETS)} or a JSON file"
        raise click.BadParameter(msg, param_hint="--arch")
    try:
        return ModelConfig.model_validate_json(read_bytes(arch))
    except ValidationError as e:
        msg = f"{arch}: {e.errors()[0]['msg']}"
        raise ConfigValidationError(msg) from e


@qvit_group.command(name="report-bits", help="Per-quantizer allocation and per-layer summary of a checkpoint.")
@click.option("--ckpt", "ckpt_path", type=_PATH, required=True, help="Checkpoint file")
@click.option("--out", "out_path", type=_PATH, required=True, help="Allocation CSV")
@click.option("--summary", "summary_path", type=_PATH, default=None, help="Per-layer, per-role summary CSV")
def report_bits(ckpt_path: Path, out_path: Path, summary_path: Path | None) -> None:
    from rich.table import Table

    from qvit.domain.trainer import load_checkpoint, restore_model
    from qvit.domain.vit import (
        SUMMARY_COLUMNS,
        get_allocation,
        summarize_allocation,
        summary_rows,
        write_allocation_csv,
    )
    from qvit.lib.io import write_csv

    alloc = get_allocation(restore_model(load_checkpoint(ckpt_path)))
    write_allocation_csv(out_path, alloc)
    summaries = summarize_allocation(alloc)
    rows = summary_rows(summaries)
    if summary_path is not None:
        write_csv(summary_path, SUMMARY_COLUMNS, rows)
    table = Table(*SUMMARY_COLUMNS, title="Bit-width allocation")
    for row in rows:
        table.add_row(*(str(cell) for cell in row))
    _console().print(table)
    _echo_json({"allocation": str(out_path), "quantizers": len(alloc), "summary": summaries})
