"""Tensor values and the gradient tape.

Tensors are immutable 64-bit float arrays with an optional gradient and a
``tracked`` flag. Primitive applications on tracked tensors are recorded
on the active Tape; ``backward`` replays the tape once, in reverse, and
accumulates gradients additively across shared nodes.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from ..errors import ContractViolation

_NODE_COUNTER = itertools.count()


class Tensor:
    """An n-dimensional float64 array, optionally gradient-tracked."""

    __slots__ = ("data", "grad", "tracked", "node_id")

    def __init__(self, data, tracked: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.tracked = bool(tracked)
        self.node_id = next(_NODE_COUNTER)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractViolation(
                f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, tracked={self.tracked})"


def as_tensor(value) -> Tensor:
    """Wrap arrays/scalars as untracked constant tensors."""
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


class OpRecord:
    """One primitive application: op id, node ids, and its backward rule."""

    __slots__ = ("op_id", "input_ids", "output_id", "backward_fn")

    def __init__(self, op_id: str, input_ids, output_id: int,
                 backward_fn: Callable):
        self.op_id = op_id
        self.input_ids = tuple(input_ids)
        self.output_id = output_id
        self.backward_fn = backward_fn


class Tape:
    """Topologically ordered record of primitive applications."""

    def __init__(self):
        self.records: list[OpRecord] = []
        self.produced: set[int] = set()

    def record(self, op_id: str, inputs: Iterable[Tensor], output: Tensor,
               backward_fn: Callable) -> None:
        rec = OpRecord(op_id, (t.node_id for t in inputs), output.node_id,
                       backward_fn)
        self.records.append(rec)
        self.produced.add(output.node_id)

    def __len__(self) -> int:
        return len(self.records)


_TAPE_STACK: list[Optional[Tape]] = []


def active_tape() -> Optional[Tape]:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


@contextmanager
def recording(tape: Tape):
    """Make ``tape`` the active tape within the block."""
    _TAPE_STACK.append(tape)
    try:
        yield tape
    finally:
        _TAPE_STACK.pop()


@contextmanager
def no_grad():
    """Disable recording within the block (forward evaluation only)."""
    _TAPE_STACK.append(None)
    try:
        yield
    finally:
        _TAPE_STACK.pop()


def backward(loss: Tensor, tape: Tape) -> Dict[int, Tensor]:
    """Gradients of a scalar loss w.r.t. every tracked leaf on the tape.

    Visits each recorded op exactly once, in reverse order. Returns a map
    from leaf node id to gradient tensor; gradients accumulate additively
    when a node feeds several consumers. Leaf tensors also get their
    ``grad`` field set.
    """
    if loss.data.size != 1:
        raise ContractViolation(
            f"backward() needs a scalar loss, got shape {loss.data.shape}")
    grads: Dict[int, np.ndarray] = {
        loss.node_id: np.ones_like(loss.data)}
    holders: Dict[int, Tensor] = {loss.node_id: loss}

    def accumulate(tensor: Tensor, grad: np.ndarray) -> None:
        nid = tensor.node_id
        existing = grads.get(nid)
        if existing is None:
            grads[nid] = grad.astype(np.float64, copy=False)
            holders[nid] = tensor
        else:
            grads[nid] = existing + grad

    for rec in reversed(tape.records):
        g = grads.pop(rec.output_id, None)
        if g is None:
            continue
        rec.backward_fn(g, accumulate)

    result: Dict[int, Tensor] = {}
    for nid, arr in grads.items():
        if nid in tape.produced:
            continue
        holder = holders.get(nid)
        if holder is not None and not holder.tracked:
            continue
        result[nid] = Tensor(arr)
        if holder is not None:
            holder.grad = arr
    return result
