"""Adam optimizer and the warmup / inverse-sqrt learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from ..errors import ContractViolation
from .tensor import Tensor


@dataclass
class AdamState:
    """First/second moment estimates aligned with a fixed parameter list."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    u: List[np.ndarray] = field(default_factory=list)

    def ensure(self, params: Sequence[Tensor]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p.data) for p in params]
            self.u = [np.zeros_like(p.data) for p in params]
        if len(self.m) != len(params):
            raise ContractViolation(
                f"AdamState tracks {len(self.m)} params, got {len(params)}")


def adam_step(params: Sequence[Tensor], grads: Dict[int, Tensor],
              state: AdamState, lr: float) -> List[Tensor]:
    """One Adam update with bias correction; returns fresh param tensors.

    ``grads`` maps node id -> gradient tensor as produced by backward();
    a missing gradient for any parameter is a contract violation.
    """
    if lr <= 0:
        raise ContractViolation(f"adam_step needs lr > 0, got {lr}")
    state.ensure(params)
    for p in params:
        if p.node_id not in grads:
            raise ContractViolation(
                f"missing gradient for parameter node {p.node_id} "
                f"of shape {p.shape}")
    state.t += 1
    t = state.t
    b1, b2, eps = state.beta1, state.beta2, state.eps
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    updated: List[Tensor] = []
    for i, p in enumerate(params):
        g = grads[p.node_id].data
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.u[i] = b2 * state.u[i] + (1.0 - b2) * (g * g)
        mhat = state.m[i] / bc1
        uhat = state.u[i] / bc2
        updated.append(Tensor(p.data - lr * mhat / (np.sqrt(uhat) + eps),
                              tracked=True))
    return updated


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup to ``base_lr`` at step w, then inverse-sqrt decay."""

    base_lr: float
    warmup_steps: int

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ContractViolation(f"base_lr must be > 0: {self.base_lr}")
        if self.warmup_steps < 1:
            raise ContractViolation(
                f"warmup_steps must be >= 1: {self.warmup_steps}")


def lr_at(step: int, schedule: LrSchedule) -> float:
    """lr = base * min(step/w, sqrt(w/step)); peaks at exactly step == w."""
    if step < 1:
        raise ContractViolation(f"lr_at needs step >= 1, got {step}")
    w = schedule.warmup_steps
    return schedule.base_lr * min(step / w, math.sqrt(w / step))
