from __future__ import annotations

import json
from typing import TYPE_CHECKING

import pytest
from click.testing import CliRunner

from qvit.cli import qvit_group

if TYPE_CHECKING:
    from pathlib import Path

pytestmark = pytest.mark.slow

MODEL = {
    "image_size": 16,
    "patch_size": 4,
    "embed_dim": 16,
    "depth": 2,
    "heads": 2,
    "mlp_dim": 32,
    "num_classes": 4,
}
DATA = "synthetic:seed=1,count=256,eval_count=64,noise=0.2"


def _invoke(runner: CliRunner, args: list[str]) -> dict[str, object]:
    result = runner.invoke(qvit_group, args)
    assert result.exit_code == 0, result.output
    return json.loads(result.stdout)  # type: ignore[no-any-return]


def test_pretrain_train_eval_report(tmp_path: Path) -> None:
    runner = CliRunner()
    float_cfg, qat_cfg, arch = tmp_path / "float.json", tmp_path / "qat.json", tmp_path / "arch.json"
    float_cfg.write_text(
        json.dumps({"model": {**MODEL, "quant_mode": "float"}, "train": {"epochs": 8, "batch_size": 32}})
    )
    qat_cfg.write_text(
        json.dumps(
            {
                "model": {**MODEL, "quant_mode": "learned"},
                "train": {"epochs": 3, "sigma": 0.67, "batch_size": 32, "constraint_bits": 4, "eta": 0.1},
            }
        )
    )
    arch.write_text(json.dumps(MODEL))

    pretrained = _invoke(
        runner, ["pretrain", "--config", str(float_cfg), "--out", str(tmp_path / "float"), "--data", DATA]
    )
    assert pretrained["eval_accuracy"] > 0.25  # type: ignore[operator]

    trained = _invoke(
        runner,
        [
            "train",
            "--config",
            str(qat_cfg),
            "--init",
            str(pretrained["checkpoint"]),
            "--out",
            str(tmp_path / "qat"),
            "--data",
            DATA,
        ],
    )
    history = [json.loads(line) for line in (tmp_path / "qat" / "metrics.jsonl").read_text().splitlines()]
    assert [row["stage"] for row in history] == ["search", "search", "dive"]
    assert len(list((tmp_path / "qat" / "allocations").glob("epoch*.csv"))) == 3

    evaluated = _invoke(runner, ["eval", "--ckpt", str(trained["checkpoint"]), "--data", DATA])
    assert evaluated == {"accuracy": trained["eval_accuracy"], "count": 64}

    alloc = tmp_path / "alloc.csv"
    reported = _invoke(runner, ["report-bits", "--ckpt", str(trained["checkpoint"]), "--out", str(alloc)])
    assert reported["quantizers"] == 2 * (9 * 2 + 1) + 4 * 2 + 4

    recount = _invoke(runner, ["bitops", "--arch", str(arch), "--alloc", str(alloc), "--budget-bits", "4"])
    assert recount["total"] == trained["bitops"]
    assert recount["budget"] == trained["budget"]
