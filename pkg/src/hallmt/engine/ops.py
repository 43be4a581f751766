"""Differentiable primitives.

Every function takes/returns Tensors, computes the forward value with
numpy, and registers a backward rule on the active tape when any input is
tracked. Broadcasting ops reduce gradients back to the input shapes.

``apply_primitive`` is the string-dispatched front end; it validates the
primitive id and lets shape errors surface as ContractViolation.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from scipy.special import erf

from ..errors import ConfigurationError, ContractViolation
from .tensor import Tensor, active_tape, as_tensor

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _sum_to_shape(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape))
                 if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _maybe_record(op_id, inputs, out, backward_fn):
    tape = active_tape()
    if tape is not None and out.tracked:
        tape.record(op_id, inputs, out, backward_fn)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2 if b.ndim > 1 else 0]:
        raise ContractViolation(
            f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = Tensor(np.matmul(a.data, b.data), a.tracked or b.tracked)
    ad, bd = a.data, b.data

    def bwd(g, accumulate):
        if a.tracked:
            ga = np.matmul(g, np.swapaxes(bd, -1, -2))
            accumulate(a, _sum_to_shape(ga, ad.shape))
        if b.tracked:
            gb = np.matmul(np.swapaxes(ad, -1, -2), g)
            accumulate(b, _sum_to_shape(gb, bd.shape))

    _maybe_record("matmul", (a, b), out, bwd)
    return out


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ContractViolation(
            f"add shape mismatch: {a.shape} + {b.shape}") from exc
    out = Tensor(data, a.tracked or b.tracked)

    def bwd(g, accumulate):
        if a.tracked:
            accumulate(a, _sum_to_shape(g, a.data.shape))
        if b.tracked:
            accumulate(b, _sum_to_shape(g, b.data.shape))

    _maybe_record("add", (a, b), out, bwd)
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise ContractViolation(
            f"mul shape mismatch: {a.shape} * {b.shape}") from exc
    out = Tensor(data, a.tracked or b.tracked)
    ad, bd = a.data, b.data

    def bwd(g, accumulate):
        if a.tracked:
            accumulate(a, _sum_to_shape(g * bd, ad.shape))
        if b.tracked:
            accumulate(b, _sum_to_shape(g * ad, bd.shape))

    _maybe_record("mul", (a, b), out, bwd)
    return out


def scale(a, factor: float) -> Tensor:
    """Multiply by a python scalar constant."""
    return mul(a, Tensor(np.float64(factor)))


def sub(a, b) -> Tensor:
    return add(a, scale(b, -1.0))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractViolation("concat of an empty tensor list")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ContractViolation(
            f"concat shape mismatch: {[t.shape for t in tensors]}") from exc
    out = Tensor(data, any(t.tracked for t in tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g, accumulate):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.tracked:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                accumulate(t, g[tuple(idx)])

    _maybe_record("concat", tensors, out, bwd)
    return out


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise ContractViolation(
            f"reshape {a.shape} -> {shape} invalid") from exc
    out = Tensor(data, a.tracked)
    orig = a.data.shape

    def bwd(g, accumulate):
        accumulate(a, g.reshape(orig))

    _maybe_record("reshape", (a,), out, bwd)
    return out


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.transpose(a.data, axes), a.tracked)
    inverse = np.argsort(axes)

    def bwd(g, accumulate):
        accumulate(a, np.transpose(g, inverse))

    _maybe_record("transpose", (a,), out, bwd)
    return out


def embedding_gather(table, ids) -> Tensor:
    """Row gather: out[..., :] = table[ids[...], :]."""
    table = as_tensor(table)
    idx = np.asarray(ids)
    if table.ndim != 2:
        raise ContractViolation(f"gather table must be 2-d, got {table.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise ContractViolation(
            f"gather index out of range [0, {table.data.shape[0]})")
    out = Tensor(table.data[idx], table.tracked)

    def bwd(g, accumulate):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx.reshape(-1),
                  g.reshape(-1, table.data.shape[1]))
        accumulate(table, gt)

    _maybe_record("embedding-gather", (table,), out, bwd)
    return out


def gather_rows(a, idx) -> Tensor:
    """Per-batch row gather: out[b, j, :] = a[b, idx[b, j], :]."""
    a = as_tensor(a)
    idx = np.asarray(idx)
    if a.ndim != 3 or idx.ndim != 2 or idx.shape[0] != a.data.shape[0]:
        raise ContractViolation(
            f"gather-rows expects (B,L,D) and (B,J), got {a.shape}, {idx.shape}")
    batch = np.arange(a.data.shape[0])[:, None]
    out = Tensor(a.data[batch, idx], a.tracked)

    def bwd(g, accumulate):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (batch, idx), g)
        accumulate(a, ga)

    _maybe_record("gather-rows", (a,), out, bwd)
    return out


def slice_last(a, lo: int, hi: int) -> Tensor:
    """Slice [lo:hi] along the last axis."""
    a = as_tensor(a)
    out = Tensor(a.data[..., lo:hi], a.tracked)

    def bwd(g, accumulate):
        ga = np.zeros_like(a.data)
        ga[..., lo:hi] = g
        accumulate(a, ga)

    _maybe_record("slice-last", (a,), out, bwd)
    return out


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    sm = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(sm, a.tracked)

    def bwd(g, accumulate):
        dot = (g * sm).sum(axis=axis, keepdims=True)
        accumulate(a, sm * (g - dot))

    _maybe_record("softmax", (a,), out, bwd)
    return out


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    ls = shifted - lse
    out = Tensor(ls, a.tracked)
    sm = np.exp(ls)

    def bwd(g, accumulate):
        accumulate(a, g - sm * g.sum(axis=axis, keepdims=True))

    _maybe_record("log-softmax", (a,), out, bwd)
    return out


def layer_norm(a, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean, unit variance (no affine)."""
    a = as_tensor(a)
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = Tensor(xhat, a.tracked)
    n = a.data.shape[-1]

    def bwd(g, accumulate):
        gm = g.mean(axis=-1, keepdims=True)
        gx = (g * xhat).mean(axis=-1, keepdims=True)
        accumulate(a, inv * (g - gm - xhat * gx))

    _maybe_record("layer-norm", (a,), out, bwd)
    return out


def relu(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0), a.tracked)
    positive = a.data > 0

    def bwd(g, accumulate):
        accumulate(a, g * positive)

    _maybe_record("relu", (a,), out, bwd)
    return out


def gelu(a) -> Tensor:
    a = as_tensor(a)
    cdf = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    out = Tensor(a.data * cdf, a.tracked)
    ad = a.data

    def bwd(g, accumulate):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * ad * ad)
        accumulate(a, g * (cdf + ad * pdf))

    _maybe_record("gelu", (a,), out, bwd)
    return out


def dropout_mask_apply(a, mask: np.ndarray) -> Tensor:
    """Elementwise multiply by a pre-sampled constant mask."""
    a = as_tensor(a)
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != a.data.shape:
        raise ContractViolation(
            f"dropout mask shape {mask.shape} != input {a.shape}")
    out = Tensor(a.data * mask, a.tracked)

    def bwd(g, accumulate):
        accumulate(a, g * mask)

    _maybe_record("dropout-mask-apply", (a,), out, bwd)
    return out


def reduce_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), a.tracked)
    shape = a.data.shape

    def bwd(g, accumulate):
        if axis is None:
            accumulate(a, np.broadcast_to(g, shape).copy())
        else:
            ge = g if keepdims else np.expand_dims(g, axis)
            accumulate(a, np.broadcast_to(ge, shape).copy())

    _maybe_record("reduce-sum", (a,), out, bwd)
    return out


def reduce_mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.mean(axis=axis, keepdims=keepdims), a.tracked)
    shape = a.data.shape
    count = a.data.size if axis is None else shape[axis]

    def bwd(g, accumulate):
        if axis is None:
            accumulate(a, np.broadcast_to(g / count, shape).copy())
        else:
            ge = g if keepdims else np.expand_dims(g, axis)
            accumulate(a, np.broadcast_to(ge / count, shape).copy())

    _maybe_record("reduce-mean", (a,), out, bwd)
    return out


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """(B,H,W,C) -> (B,OH,OW,KH*KW*C) patch matrix (view-based)."""
    b, h, w, c = x.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    sb, sh, sw, sc = x.strides
    cols = np.lib.stride_tricks.as_strided(
        x, (b, oh, ow, kh, kw, c),
        (sb, sh * stride, sw * stride, sh, sw, sc))
    return cols.reshape(b, oh, ow, kh * kw * c)


def _col2im(cols: np.ndarray, shape, kh: int, kw: int, stride: int
            ) -> np.ndarray:
    """Scatter-add inverse of _im2col."""
    b, h, w, c = shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    out = np.zeros(shape, dtype=np.float64)
    cols = cols.reshape(b, oh, ow, kh, kw, c)
    for i in range(kh):
        for j in range(kw):
            out[:, i:i + stride * oh:stride, j:j + stride * ow:stride, :] += \
                cols[:, :, :, i, j, :]
    return out


def conv2d(x, w, stride: int = 1, padding: int = 0) -> Tensor:
    """NHWC convolution with kernel w of shape (KH, KW, CIN, COUT)."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4 or x.data.shape[3] != w.data.shape[2]:
        raise ContractViolation(
            f"conv2d shapes: input {x.shape}, kernel {w.shape}")
    kh, kw, cin, cout = w.data.shape
    xd = x.data
    if padding:
        xd = np.pad(xd, ((0, 0), (padding, padding), (padding, padding),
                         (0, 0)))
    cols = _im2col(xd, kh, kw, stride)
    b, oh, ow, _ = cols.shape
    wmat = w.data.reshape(kh * kw * cin, cout)
    cols_flat = cols.reshape(-1, kh * kw * cin)
    data = (cols_flat @ wmat).reshape(b, oh, ow, cout)
    out = Tensor(data, x.tracked or w.tracked)
    padded_shape = xd.shape

    def bwd(g, accumulate):
        gflat = g.reshape(-1, cout)
        if w.tracked:
            accumulate(w, (cols_flat.T @ gflat).reshape(w.data.shape))
        if x.tracked:
            gcols = gflat @ wmat.T
            gx = _col2im(gcols.reshape(b, oh, ow, kh * kw * cin),
                         padded_shape, kh, kw, stride)
            if padding:
                gx = gx[:, padding:-padding, padding:-padding, :]
            accumulate(x, gx)

    _maybe_record("conv2d", (x, w), out, bwd)
    return out


def conv2d_transpose(x, w, stride: int = 1, padding: int = 0) -> Tensor:
    """NHWC transposed convolution; w has shape (KH, KW, CIN, COUT).

    Output spatial size is (in-1)*stride + KH - 2*padding, the exact
    adjoint geometry of conv2d with the same stride/padding.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4 or x.data.shape[3] != w.data.shape[2]:
        raise ContractViolation(
            f"conv2d_transpose shapes: input {x.shape}, kernel {w.shape}")
    kh, kw, cin, cout = w.data.shape
    b, ih, iw, _ = x.data.shape
    full_h = (ih - 1) * stride + kh
    full_w = (iw - 1) * stride + kw
    # (CIN, KH*KW*COUT) so patch expansion is a single GEMM
    wmat = np.ascontiguousarray(
        w.data.reshape(kh * kw, cin, cout).transpose(1, 0, 2)
    ).reshape(cin, kh * kw * cout)
    xflat = x.data.reshape(-1, cin)
    cols = (xflat @ wmat).reshape(b, ih, iw, kh, kw, cout)
    full = np.zeros((b, full_h, full_w, cout), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            full[:, i:i + stride * ih:stride, j:j + stride * iw:stride, :] += \
                cols[:, :, :, i, j, :]
    if padding:
        full = full[:, padding:-padding, padding:-padding, :]
    out = Tensor(full, x.tracked or w.tracked)

    def bwd(g, accumulate):
        gp = g
        if padding:
            gp = np.pad(g, ((0, 0), (padding, padding), (padding, padding),
                            (0, 0)))
        gcols = _im2col(gp, kh, kw, stride)  # (B, ih, iw, KH*KW*COUT)
        gflat = gcols.reshape(-1, kh * kw * cout)
        if x.tracked:
            accumulate(x, (gflat @ wmat.T).reshape(x.data.shape))
        if w.tracked:
            gw = (xflat.T @ gflat).reshape(cin, kh * kw, cout)
            accumulate(w, np.ascontiguousarray(
                gw.transpose(1, 0, 2)).reshape(w.data.shape))

    _maybe_record("conv2d-transpose", (x, w), out, bwd)
    return out


_PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "concat": concat,
    "reshape": reshape,
    "embedding-gather": embedding_gather,
    "softmax": softmax,
    "log-softmax": log_softmax,
    "layer-norm": layer_norm,
    "relu": relu,
    "gelu": gelu,
    "dropout-mask-apply": dropout_mask_apply,
    "reduce-sum": reduce_sum,
    "reduce-mean": reduce_mean,
    "transpose": transpose,
    "gather-rows": gather_rows,
    "slice-last": slice_last,
    "conv2d": conv2d,
    "conv2d-transpose": conv2d_transpose,
}


def apply_primitive(op_id: str, inputs: Sequence, **kwargs) -> Tensor:
    """Dispatch a primitive by id.

    Unknown ids raise ConfigurationError; shape violations inside the
    primitive raise ContractViolation.
    """
    fn = _PRIMITIVES.get(op_id)
    if fn is None:
        raise ConfigurationError(
            f"unknown primitive {op_id!r}; valid: {sorted(_PRIMITIVES)}")
    if op_id == "concat":
        return fn(inputs, **kwargs)
    return fn(*inputs, **kwargs)


def primitive_ids() -> list[str]:
    return sorted(_PRIMITIVES)
