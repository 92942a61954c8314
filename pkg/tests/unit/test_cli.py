from __future__ import annotations

import csv
import json
from typing import TYPE_CHECKING

import pytest

from qvit.cli import qvit_group
from qvit.domain.bitops import uniform_allocation
from qvit.domain.trainer import save_checkpoint
from qvit.domain.vit import ModelConfig, VisionTransformer, build_model, write_allocation_csv
from qvit.lib.exceptions import CheckpointMagicError

if TYPE_CHECKING:
    from pathlib import Path

    from click.testing import CliRunner
    from pytest import MonkeyPatch

DATA = "synthetic:seed=3,count=32,eval_count=24,noise=0.1"
DEIT_T_4BIT = 21_455_413_248


@pytest.fixture(name="float_ckpt")
def fx_float_ckpt(tiny_model: VisionTransformer, tmp_path: Path) -> Path:
    path = tmp_path / "float.qvck"
    save_checkpoint(path, tiny_model, epoch=0, stage="float", seed=0)
    return path


@pytest.fixture(name="learned_ckpt")
def fx_learned_ckpt(tiny_config: ModelConfig, tmp_path: Path) -> Path:
    model = build_model(tiny_config.model_copy(update={"quant_mode": "learned"}), seed=2)
    for i, state in enumerate(model.quantizers()):
        state.b_tilde.data[...] = 2.0 + i % 7
    path = tmp_path / "learned.qvck"
    save_checkpoint(path, model, epoch=3, stage="final", seed=0)
    return path


def test_bitops_uniform(cli_runner: CliRunner) -> None:
    result = cli_runner.invoke(qvit_group, ["bitops", "--arch", "deit-t", "--uniform", "4"])
    assert result.exit_code == 0, result.output
    report = json.loads(result.stdout)
    assert report["total"] == DEIT_T_4BIT
    assert report["budget"] is None
    assert "GBitOPs" in result.stderr


def test_bitops_allocation_file_and_budget(cli_runner: CliRunner, tmp_path: Path) -> None:
    alloc = tmp_path / "alloc.csv"
    write_allocation_csv(alloc, uniform_allocation(ModelConfig.deit_tiny(), 4))
    entries = tmp_path / "entries.csv"
    result = cli_runner.invoke(
        qvit_group,
        ["bitops", "--arch", "deit-t", "--alloc", str(alloc), "--budget-bits", "3", "--csv", str(entries)],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.stdout)
    assert report["total"] == DEIT_T_4BIT
    assert report["over_budget"] is True
    with entries.open() as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["name"] == "patch_embed"
    assert len(rows) == len(report["entries"])


@pytest.mark.parametrize("extra", [[], ["--uniform", "4", "--alloc", "alloc.csv"]])
def test_bitops_needs_exactly_one_source(cli_runner: CliRunner, extra: list[str]) -> None:
    if extra:
        write_allocation_csv("alloc.csv", uniform_allocation(ModelConfig.toy(), 4))
    result = cli_runner.invoke(qvit_group, ["bitops", "--arch", "toy", *extra])
    assert result.exit_code == 2


def test_bitops_unknown_arch(cli_runner: CliRunner) -> None:
    result = cli_runner.invoke(qvit_group, ["bitops", "--arch", "resnet", "--uniform", "4"])
    assert result.exit_code == 2
    assert "unknown architecture" in result.output


def test_bitops_arch_file(cli_runner: CliRunner, tmp_path: Path) -> None:
    arch = tmp_path / "arch.json"
    arch.write_text(json.dumps({"embed_dim": 30, "heads": 4}))
    result = cli_runner.invoke(qvit_group, ["bitops", "--arch", str(arch), "--uniform", "4"])
    assert result.exit_code == 4
    arch.write_text(json.dumps({"depth": 1}))
    result = cli_runner.invoke(qvit_group, ["bitops", "--arch", str(arch), "--uniform", "4"])
    assert result.exit_code == 0, result.output


def test_eval(cli_runner: CliRunner, float_ckpt: Path) -> None:
    result = cli_runner.invoke(qvit_group, ["eval", "--ckpt", str(float_ckpt), "--data", DATA])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.stdout)
    assert payload["count"] == 24
    assert 0.0 <= payload["accuracy"] <= 1.0


def test_corrupt_checkpoint_exit_code(cli_runner: CliRunner, tmp_path: Path) -> None:
    bad = tmp_path / "bad.qvck"
    bad.write_bytes(b"NOPE" + bytes(64))
    result = cli_runner.invoke(qvit_group, ["eval", "--ckpt", str(bad)])
    assert result.exit_code == 5
    assert "error: " in result.stderr
    assert result.stdout == ""


def test_debug_mode_reraises(cli_runner: CliRunner, tmp_path: Path, monkeypatch: MonkeyPatch) -> None:
    monkeypatch.setenv("QVIT_DEBUG", "true")
    bad = tmp_path / "bad.qvck"
    bad.write_bytes(b"NOPE" + bytes(64))
    result = cli_runner.invoke(qvit_group, ["eval", "--ckpt", str(bad)])
    assert isinstance(result.exception, CheckpointMagicError)


def test_report_bits(cli_runner: CliRunner, learned_ckpt: Path, tmp_path: Path) -> None:
    out, summary = tmp_path / "alloc.csv", tmp_path / "summary.csv"
    result = cli_runner.invoke(
        qvit_group, ["report-bits", "--ckpt", str(learned_ckpt), "--out", str(out), "--summary", str(summary)]
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.stdout)
    assert payload["quantizers"] == 2 * (9 * 2 + 1) + 4 * 2 + 4
    assert out.read_text().splitlines()[0] == "name,layer,head,role,bit"
    assert summary.read_text().startswith("layer,role,count,min,median,max,mean")
    assert "Bit-width allocation" in result.stderr


def test_probe_heads(cli_runner: CliRunner, float_ckpt: Path) -> None:
    result = cli_runner.invoke(
        qvit_group, ["probe-heads", "--ckpt", str(float_ckpt), "--layer", "1", "--bits", "3", "--data", DATA]
    )
    assert result.exit_code == 0, result.output
    rows = json.loads(result.stdout)
    assert [(row["layer"], row["head"], row["bits"]) for row in rows] == [(1, 0, 3), (1, 1, 3)]


def test_probe_heads_bad_layer(cli_runner: CliRunner, float_ckpt: Path) -> None:
    result = cli_runner.invoke(qvit_group, ["probe-heads", "--ckpt", str(float_ckpt), "--layer", "7", "--data", DATA])
    assert result.exit_code == 8


@pytest.mark.parametrize(("extra", "baseline"), [([], "float"), (["--baseline", "ptq8"], "ptq8")])
def test_probe_mlp(cli_runner: CliRunner, float_ckpt: Path, extra: list[str], baseline: str) -> None:
    result = cli_runner.invoke(qvit_group, ["probe-mlp", "--ckpt", str(float_ckpt), "--data", DATA, *extra])
    assert result.exit_code == 0, result.output
    components = [row["component"] for row in json.loads(result.stdout)]
    assert components == [f"baseline:{baseline}", "gelu", "fc", "gelu+fc"]


def test_pretrain_rejects_bad_config(cli_runner: CliRunner, tmp_path: Path) -> None:
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"train": {"epochs": -1}}))
    result = cli_runner.invoke(qvit_group, ["pretrain", "--config", str(config), "--out", str(tmp_path / "run")])
    assert result.exit_code == 4
    assert "train.epochs" in result.stderr


@pytest.mark.parametrize(
    "args",
    [
        ["eval", "--ckpt", "missing.qvck"],
        ["report-bits", "--ckpt", "missing.qvck", "--out", "alloc.csv"],
        ["bitops", "--arch", "toy", "--alloc", "missing.csv"],
        ["pretrain", "--config", "missing.json", "--out", "run"],
    ],
)
def test_missing_input_file_exit_code(cli_runner: CliRunner, args: list[str]) -> None:
    result = cli_runner.invoke(qvit_group, args)
    assert result.exit_code == 3
    assert "cannot read" in result.stderr


def test_missing_file_and_unknown_flag_exit_differently(cli_runner: CliRunner) -> None:
    missing = cli_runner.invoke(qvit_group, ["eval", "--ckpt", "/nonexistent/model.qvck"])
    unknown = cli_runner.invoke(qvit_group, ["eval", "--bogus"])
    assert unknown.exit_code == 2
    assert missing.exit_code == 3
