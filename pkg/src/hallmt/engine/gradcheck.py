"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import ContractViolation, NumericFailure
from .tensor import Tape, Tensor, backward, no_grad, recording


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def gradcheck(f: Callable[[Tensor], Tensor], x: Tensor,
              eps: float = 1e-5) -> float:
    """Max relative error between backward() and central differences.

    ``f`` must be deterministic (dropout disabled, RNG fixed). Raises
    NumericFailure naming the element if non-finite values appear.
    """
    if not (0.0 < eps <= 1e-2):
        raise ContractViolation(f"eps must be in (0, 1e-2], got {eps}")
    probe = Tensor(x.data.copy(), tracked=True)
    tape = Tape()
    with recording(tape):
        loss = f(probe)
    grads = backward(loss, tape)
    if probe.node_id not in grads:
        analytic = np.zeros_like(probe.data)
    else:
        analytic = grads[probe.node_id].data
    if not np.all(np.isfinite(analytic)):
        bad = int(np.flatnonzero(~np.isfinite(analytic))[0])
        raise NumericFailure(f"non-finite analytic gradient at element {bad}")

    numeric = np.zeros_like(x.data)
    flat = numeric.reshape(-1)
    base = x.data.copy()
    for i in range(base.size):
        for sign in (+1.0, -1.0):
            shifted = base.copy()
            shifted.reshape(-1)[i] += sign * eps
            with no_grad():
                value = f(Tensor(shifted)).item()
            if not np.isfinite(value):
                raise NumericFailure(
                    f"non-finite loss when perturbing element {i}")
            flat[i] += sign * value / (2.0 * eps)
    return _relative_error(analytic, numeric)


def gradcheck_many(f: Callable[[Sequence[Tensor]], Tensor],
                   xs: Sequence[Tensor], eps: float = 1e-5) -> float:
    """gradcheck over a list of tensors jointly (e.g. all model params)."""
    if not (0.0 < eps <= 1e-2):
        raise ContractViolation(f"eps must be in (0, 1e-2], got {eps}")
    probes = [Tensor(x.data.copy(), tracked=True) for x in xs]
    tape = Tape()
    with recording(tape):
        loss = f(probes)
    grads = backward(loss, tape)
    worst = 0.0
    for k, probe in enumerate(probes):
        analytic = (grads[probe.node_id].data if probe.node_id in grads
                    else np.zeros_like(probe.data))
        if not np.all(np.isfinite(analytic)):
            bad = int(np.flatnonzero(~np.isfinite(analytic))[0])
            raise NumericFailure(
                f"non-finite analytic gradient at tensor {k} element {bad}")
        numeric = np.zeros_like(probe.data)
        flat = numeric.reshape(-1)
        base = probe.data
        for i in range(base.size):
            for sign in (+1.0, -1.0):
                shadow = [p.data if j != k else None
                          for j, p in enumerate(probes)]
                shifted = base.copy()
                shifted.reshape(-1)[i] += sign * eps
                shadow[k] = shifted
                with no_grad():
                    value = f([Tensor(d) for d in shadow]).item()
                if not np.isfinite(value):
                    raise NumericFailure(
                        f"non-finite loss at tensor {k} element {i}")
                flat[i] += sign * value / (2.0 * eps)
        worst = max(worst, _relative_error(analytic, numeric))
    return worst
