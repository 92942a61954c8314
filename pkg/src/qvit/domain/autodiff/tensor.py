"""Tensor, tape and the reverse sweep.

The tape is define-by-run: operations executed inside an active :func:`recording`
block append a :class:`Node`; outside such a block nothing is recorded and the
forward pass costs no bookkeeping (evaluation mode).
"""

from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from qvit.lib.exceptions import ArityError, NonFiniteError, ShapeMismatchError, TapeConsumedError

if TYPE_CHECKING:
    from collections.abc import Callable, Iterator, Sequence

    from numpy.typing import ArrayLike, NDArray

    Array = NDArray[np.float64]
    BackwardFn = Callable[[Array], Sequence["Array | None"]]

__all__ = (
    "Node",
    "Tape",
    "Tensor",
    "active_tape",
    "backward",
    "custom_node",
    "recording",
    "unbroadcast",
)

_active_tape: ContextVar[Tape | None] = ContextVar("qvit_active_tape", default=None)


class Tensor:
    """Dense float64 buffer that can take part in a gradient tape."""

    __slots__ = ("_node", "_tape", "data", "grad", "name", "requires_grad")

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: str | None = None) -> None:
        array = np.array(data, dtype=np.float64)
        if not np.isfinite(array).all():
            msg = f"tensor {name or ''} holds non-finite values".replace("  ", " ")
            raise NonFiniteError(msg)
        self.data: Array = array
        self.requires_grad = requires_grad
        self.grad: Array | None = None
        self.name = name
        self._node: Node | None = None
        self._tape: Tape | None = None

    @classmethod
    def wrap(cls, data: Array) -> Tensor:
        """Adopt an op result without copying it."""
        if not np.isfinite(data).all():
            msg = "operation produced non-finite values"
            raise NonFiniteError(msg)
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = False
        out.grad = None
        out.name = None
        out._node = None
        out._tape = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def item(self) -> float:
        if self.data.size != 1:
            msg = f"item() needs a single element, tensor has shape {self.shape}"
            raise ShapeMismatchError(msg)
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> Array:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; the implementations live in ``ops``
    def __add__(self, other: Tensor) -> Tensor:
        from .ops import add

        return add(self, other)

    def __sub__(self, other: Tensor) -> Tensor:
        from .ops import sub

        return sub(self, other)

    def __mul__(self, other: Tensor | float) -> Tensor:
        from .ops import mul, mul_scalar

        if isinstance(other, Tensor):
            return mul(self, other)
        return mul_scalar(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> Tensor:
        from .ops import mul_scalar

        return mul_scalar(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from .ops import matmul

        return matmul(self, other)


@dataclass(slots=True)
class Node:
    """One recorded operation."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward_fn: BackwardFn


@dataclass
class Tape:
    """Ordered record of operations, consumed by exactly one reverse sweep."""

    nodes: list[Node] = field(default_factory=list)
    consumed: bool = False

    def record(self, node: Node) -> None:
        if self.consumed:
            msg = "cannot record on a tape that already ran backward"
            raise TapeConsumedError(msg)
        self.nodes.append(node)

    def backward(self, loss: Tensor) -> None:
        """Populate ``grad`` on every tensor that requires it.

        Nodes are visited once each, in reverse recording order; gradients
        arriving at the same tensor are summed in input order.
        """
        if self.consumed:
            msg = "backward was already called on this tape; record the graph again"
            raise TapeConsumedError(msg)
        if loss.size != 1:
            msg = f"backward needs a scalar loss, got shape {loss.shape}"
            raise ShapeMismatchError(msg)
        self.consumed = True
        pending: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
        if loss.is_leaf:
            _accumulate(loss, pending[id(loss)])
            return
        for node in reversed(self.nodes):
            upstream = pending.pop(id(node.output), None)
            if upstream is None:
                continue
            node.output.grad = upstream
            grads = node.backward_fn(upstream)
            if len(grads) != len(node.inputs):
                msg = f"{node.op}: backward returned {len(grads)} gradients for {len(node.inputs)} inputs"
                raise ArityError(msg)
            for tensor, grad in zip(node.inputs, grads, strict=True):
                if grad is None or not tensor.requires_grad:
                    continue
                grad = unbroadcast(np.asarray(grad, dtype=np.float64), tensor.shape)
                if tensor.is_leaf:
                    _accumulate(tensor, grad)
                else:
                    key = id(tensor)
                    pending[key] = pending[key] + grad if key in pending else grad


def _accumulate(tensor: Tensor, grad: Array) -> None:
    tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad


def unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    if grad.shape != shape:
        msg = f"gradient of shape {grad.shape} cannot be reduced to {shape}"
        raise ShapeMismatchError(msg)
    return grad


def active_tape() -> Tape | None:
    return _active_tape.get()


@contextmanager
def recording(tape: Tape | None = None) -> Iterator[Tape]:
    """Record operations executed inside the block on ``tape``."""
    tape = Tape() if tape is None else tape
    token = _active_tape.set(tape)
    try:
        yield tape
    finally:
        _active_tape.reset(token)


def emit(op: str, inputs: Sequence[Tensor], data: Array, backward_fn: BackwardFn) -> Tensor:
    """Wrap a forward result and record it when a tape is listening."""
    out = Tensor.wrap(data)
    tape = _active_tape.get()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        node = Node(op=op, inputs=tuple(inputs), output=out, backward_fn=backward_fn)
        tape.record(node)
        out._node = node
        out._tape = tape
    return out


def custom_node(
    inputs: Sequence[Tensor],
    forward_fn: Callable[..., ArrayLike],
    backward_fn: BackwardFn,
    op: str = "custom",
) -> Tensor:
    """Run ``forward_fn`` on the input buffers and install ``backward_fn`` verbatim.

    No gradient is derived from ``forward_fn``; this is the hook for
    straight-through surrogates.
    """
    data = np.asarray(forward_fn(*(t.data for t in inputs)), dtype=np.float64)
    arity = len(inputs)

    def checked(upstream: Array) -> Sequence[Array | None]:
        grads = backward_fn(upstream)
        if len(grads) != arity:
            msg = f"{op}: backward_fn returned {len(grads)} gradients for {arity} inputs"
            raise ArityError(msg)
        return grads

    return emit(op, inputs, data, checked)


def backward(loss: Tensor) -> None:
    """Run the reverse sweep of the tape ``loss`` was recorded on."""
    tape: Any = loss._tape
    if tape is None:
        if loss.requires_grad:
            Tape().backward(loss)
            return
        msg = "loss was not recorded on a tape; run the forward pass inside recording()"
        raise TapeConsumedError(msg)
    tape.backward(loss)
