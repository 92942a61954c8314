"""Sensitivity probes.

Both probes start from a model whose switchable scales are already
calibrated for every candidate bit, so dropping a quantizer to ``k`` bits
only changes which scale entry it reads. Every touched quantizer is
restored afterwards.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import TYPE_CHECKING, Literal

import structlog

from qvit.lib.exceptions import ModelStateError

from .schemas import HeadProbeRow, MlpProbeRow
from .services import evaluate

if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence

    from qvit.domain.data import Dataset
    from qvit.domain.quant import QuantizerState
    from qvit.domain.vit import VisionTransformer

__all__ = ("MlpBaseline", "head_quantizers", "preserved_quantizers", "probe_head_sensitivity", "probe_mlp_components")

logger = structlog.get_logger()

MlpBaseline = Literal["float", "ptq8"]


@contextmanager
def preserved_quantizers(states: Sequence[QuantizerState]) -> Iterator[None]:
    snapshots = [state.snapshot() for state in states]
    try:
        yield
    finally:
        for state, snapshot in zip(states, snapshots, strict=True):
            state.restore(snapshot)


def head_quantizers(model: VisionTransformer, layer: int, head: int) -> list[QuantizerState]:
    """The five activation and four weight quantizers of one attention head."""
    h = model.blocks[layer].msa.heads[head]
    return [
        h.q_quant,
        h.k_quant,
        h.v_quant,
        h.attn_quant,
        h.out_quant,
        h.query.weight_quant,
        h.key.weight_quant,
        h.value.weight_quant,
        h.output.weight_quant,
    ]


def probe_head_sensitivity(
    model: VisionTransformer,
    dataset: Dataset,
    layer: int,
    bits: int = 2,
    batch_size: int = 256,
) -> list[HeadProbeRow]:
    """Accuracy drop when one head of ``layer`` is pushed to ``bits``, per head.

    Raises:
        ModelStateError: ``layer`` is out of range.
    """
    if not 0 <= layer < len(model.blocks):
        msg = f"layer {layer} out of range for a model with {len(model.blocks)} blocks"
        raise ModelStateError(msg)
    baseline = evaluate(model, dataset, batch_size)
    rows = []
    for head in range(len(model.blocks[layer].msa.heads)):
        states = head_quantizers(model, layer, head)
        with preserved_quantizers(states):
            for state in states:
                state.freeze(bits)
            accuracy = evaluate(model, dataset, batch_size)
        rows.append(HeadProbeRow(layer=layer, head=head, bits=bits, accuracy=accuracy, drop=baseline - accuracy))
        logger.info("head_probed", layer=layer, head=head, accuracy=accuracy, drop=baseline - accuracy)
    return rows


def _mlp_parts(model: VisionTransformer) -> dict[str, list[QuantizerState]]:
    gelu = [block.mlp.gelu_quant for block in model.blocks]
    fc = [q for block in model.blocks for q in (block.mlp.fc1.weight_quant, block.mlp.fc2.weight_quant)]
    return {"gelu": gelu, "fc": fc, "gelu+fc": gelu + fc}


def probe_mlp_components(
    model: VisionTransformer,
    dataset: Dataset,
    bits: int = 2,
    baseline: MlpBaseline = "float",
    batch_size: int = 256,
) -> list[MlpProbeRow]:
    """Accuracy with only GELU outputs, only FC weights, or both quantized low.

    Drops are measured against the float model by default: every other
    quantizer is disabled. ``ptq8`` instead keeps the other quantizers at
    their calibrated 8-bit setting.
    """
    states = model.quantizers()
    rows = []
    with preserved_quantizers(states):
        if baseline == "float":
            for state in states:
                state.enabled = False
        reference = evaluate(model, dataset, batch_size)
        rows.append(MlpProbeRow(component=f"baseline:{baseline}", bits=0, accuracy=reference, drop=0.0))
        for component, targets in _mlp_parts(model).items():
            with preserved_quantizers(targets):
                for state in targets:
                    state.enabled = True
                    state.freeze(bits)
                accuracy = evaluate(model, dataset, batch_size)
            rows.append(MlpProbeRow(component=component, bits=bits, accuracy=accuracy, drop=reference - accuracy))
            logger.info("mlp_component_probed", component=component, accuracy=accuracy)
    return rows
