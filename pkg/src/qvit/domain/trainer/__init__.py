"""Training, calibration, checkpoints and sensitivity probes."""

from .checkpoint import (
    Checkpoint,
    CheckpointHeader,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    restore_model,
    restore_optimizer,
    round_to_checkpoint_precision,
    save_checkpoint,
    state_digest,
)
from .config import RunConfig, TrainConfig, load_run_config
from .optim import AdamW, QuantizerDescent, cosine_lr
from .probes import MlpBaseline, head_quantizers, probe_head_sensitivity, probe_mlp_components
from .schemas import EpochMetrics, HeadProbeRow, MlpProbeRow
from .services import (
    RunResult,
    calibrate_ptq,
    calibrate_scales,
    calibration_images,
    evaluate,
    freeze_bits,
    init_qat,
    load_datasets,
    pretrain_float,
    train_qat,
)

__all__ = (
    "AdamW",
    "Checkpoint",
    "CheckpointHeader",
    "EpochMetrics",
    "HeadProbeRow",
    "MlpBaseline",
    "MlpProbeRow",
    "QuantizerDescent",
    "RunConfig",
    "RunResult",
    "TrainConfig",
    "calibrate_ptq",
    "calibrate_scales",
    "calibration_images",
    "cosine_lr",
    "decode_checkpoint",
    "encode_checkpoint",
    "evaluate",
    "freeze_bits",
    "head_quantizers",
    "init_qat",
    "load_checkpoint",
    "load_datasets",
    "load_run_config",
    "pretrain_float",
    "probe_head_sensitivity",
    "probe_mlp_components",
    "restore_model",
    "restore_optimizer",
    "round_to_checkpoint_precision",
    "save_checkpoint",
    "state_digest",
    "train_qat",
)
