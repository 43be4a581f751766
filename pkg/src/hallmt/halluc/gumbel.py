"""Gumbel-softmax relaxation of categorical sampling with annealing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..engine.ops import add, log_softmax, scale, softmax
from ..engine.tensor import Tensor
from ..errors import ContractViolation

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class GumbelConfig:
    tau0: float = 5.0
    tau_min: float = 0.1
    rate: float = 0.003
    stream: str = "gumbel"

    def __post_init__(self):
        if not (self.tau0 >= self.tau_min > 0):
            raise ContractViolation(
                f"need tau0 >= tau_min > 0, got {self.tau0}, {self.tau_min}")
        if self.rate <= 0:
            raise ContractViolation(f"anneal rate must be > 0: {self.rate}")


def anneal_tau(step: int, cfg: GumbelConfig) -> float:
    """Exponential decay from tau0 with a floor at tau_min."""
    if step < 0:
        raise ContractViolation(f"step must be >= 0, got {step}")
    return max(cfg.tau_min, cfg.tau0 * math.exp(-cfg.rate * step))


def sample_gumbel(shape, rng: np.random.Generator) -> np.ndarray:
    """Standard Gumbel(0,1) noise: -log(-log u), u uniform in (0, 1)."""
    u = np.clip(rng.random(shape), PROB_FLOOR, 1.0 - PROB_FLOOR)
    return -np.log(-np.log(u))


def gumbel_softmax_sample(pi: np.ndarray, tau: float,
                          rng: np.random.Generator = None,
                          noise: np.ndarray = None) -> np.ndarray:
    """Soft one-hot sample(s): softmax((log pi + g) / tau) over the last axis.

    ``pi`` holds categorical probabilities (floored at 1e-12 before the
    log). Pass either an RNG to draw fresh noise or explicit ``noise``.
    """
    if tau <= 0:
        raise ContractViolation(f"tau must be > 0, got {tau}")
    pi = np.asarray(pi, dtype=np.float64)
    if noise is None:
        if rng is None:
            raise ContractViolation("need an rng or explicit noise")
        noise = sample_gumbel(pi.shape, rng)
    logits = (np.log(np.maximum(pi, PROB_FLOOR)) + noise) / tau
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def gumbel_softmax_from_logits(logits: Tensor, tau: float,
                               noise: np.ndarray) -> Tensor:
    """Differentiable relaxed sample from unnormalized logits.

    log-softmax(logits) equals log pi exactly, so this matches
    gumbel_softmax_sample while letting gradients flow to the logits.
    """
    if tau <= 0:
        raise ContractViolation(f"tau must be > 0, got {tau}")
    return softmax(scale(add(log_softmax(logits), Tensor(noise)), 1.0 / tau))
