"""Stage-1 optimization loop for the discrete visual encoder."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..engine.optim import AdamState, adam_step
from ..engine.tensor import Tape, backward, recording
from ..errors import ContractViolation, NumericFailure
from .model import VqConfig, VqModel

logger = logging.getLogger(__name__)

USAGE_WARN_FRACTION = 0.10


@dataclass
class VqTrainReport:
    steps: int
    epoch_mse: List[float] = field(default_factory=list)
    epoch_usage: List[float] = field(default_factory=list)
    step_mse: List[float] = field(default_factory=list)


def train_vae(images: np.ndarray, cfg: VqConfig, steps: int,
              batch_size: int, lr: float, seed: int,
              model: Optional[VqModel] = None,
              log_every: int = 0) -> tuple[VqModel, VqTrainReport]:
    """Adam loop over vq losses; returns the trained model and a report.

    Reports reconstruction MSE and codebook usage per epoch. Aborts with
    the step number and recent loss trace if the loss goes non-finite.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4 or images.shape[0] == 0:
        raise ContractViolation("train_vae needs a non-empty (N,H,W,3) set")
    init_rng = np.random.default_rng(seed)
    if model is None:
        model = VqModel(cfg, init_rng)
    shuffle_rng = np.random.default_rng(seed + 1)
    state = AdamState()
    report = VqTrainReport(steps=steps)
    n = images.shape[0]
    order = shuffle_rng.permutation(n)
    cursor = 0
    epoch_losses: List[float] = []
    epoch_used: set = set()
    trace: List[float] = []
    for step in range(1, steps + 1):
        if cursor + batch_size > n:
            order = shuffle_rng.permutation(n)
            cursor = 0
            if epoch_losses:
                usage_frac = len(epoch_used) / cfg.k
                report.epoch_mse.append(float(np.mean(epoch_losses)))
                report.epoch_usage.append(usage_frac)
                if usage_frac < USAGE_WARN_FRACTION:
                    logger.warning(
                        "codebook usage %.1f%% below %.0f%% at step %d",
                        100 * usage_frac, 100 * USAGE_WARN_FRACTION, step)
                epoch_losses, epoch_used = [], set()
        batch = images[order[cursor:cursor + batch_size]]
        cursor += batch_size
        tape = Tape()
        with recording(tape):
            loss, diag = model.vq_losses(batch)
        value = float(loss.data)
        trace.append(value)
        if not np.isfinite(value):
            raise NumericFailure(
                f"non-finite vq loss at step {step}; trace tail "
                f"{trace[-5:]}")
        report.step_mse.append(diag["recon_mse"])
        epoch_losses.append(diag["recon_mse"])
        epoch_used.update(np.flatnonzero(diag["usage"]).tolist())
        grads = backward(loss, tape)
        params = model.store.tensors()
        model.store.replace_all(adam_step(params, grads, state, lr))
        if log_every and step % log_every == 0:
            logger.info("vq step %d loss %.5f mse %.5f", step, value,
                        diag["recon_mse"])
    if epoch_losses:
        report.epoch_mse.append(float(np.mean(epoch_losses)))
        report.epoch_usage.append(len(epoch_used) / cfg.k)
    return model, report
