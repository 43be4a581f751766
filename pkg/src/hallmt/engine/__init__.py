"""Deterministic reverse-mode differentiable-computation core."""

from .gradcheck import gradcheck, gradcheck_many
from .ops import apply_primitive, primitive_ids
from .optim import AdamState, LrSchedule, adam_step, lr_at
from .rng import RngHub
from .tensor import Tape, Tensor, backward, no_grad, recording

__all__ = [
    "AdamState", "LrSchedule", "RngHub", "Tape", "Tensor",
    "adam_step", "apply_primitive", "backward", "gradcheck",
    "gradcheck_many", "lr_at", "no_grad", "primitive_ids", "recording",
]
