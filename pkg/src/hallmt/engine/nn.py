"""Neural-net building blocks on top of the primitive ops.

Parameters live in a ParamStore keyed by hierarchical names; layers look
their tensors up by name at call time, so the training loop can swap in
updated tensors after each optimizer step without touching the layers.
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import ContractViolation
from .ops import (add, concat, dropout_mask_apply, gelu, layer_norm, matmul,
                  mul, reshape, scale, softmax, transpose)
from .tensor import Tensor


class ParamStore:
    """Ordered name -> tracked Tensor registry for one model."""

    def __init__(self, rng: np.random.Generator):
        self._params: Dict[str, Tensor] = {}
        self.rng = rng

    def create(self, name: str, shape, init: str = "fan_in") -> Tensor:
        if name in self._params:
            raise ContractViolation(f"duplicate parameter {name!r}")
        if init == "zeros":
            data = np.zeros(shape, dtype=np.float64)
        elif init == "ones":
            data = np.ones(shape, dtype=np.float64)
        elif init == "fan_in":
            fan = shape[0] if len(shape) > 1 else max(shape[0], 1)
            data = self.rng.normal(0.0, 1.0 / math.sqrt(fan), size=shape)
        elif init == "small":
            data = self.rng.normal(0.0, 0.02, size=shape)
        else:
            raise ContractViolation(f"unknown init {init!r}")
        t = Tensor(data, tracked=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> List[str]:
        return list(self._params)

    def tensors(self) -> List[Tensor]:
        return list(self._params.values())

    def replace_all(self, tensors: Sequence[Tensor]) -> None:
        if len(tensors) != len(self._params):
            raise ContractViolation("replace_all length mismatch")
        for name, t in zip(list(self._params), tensors):
            self._params[name] = t

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        for name in self._params:
            if name not in arrays:
                raise ContractViolation(f"checkpoint missing tensor {name!r}")
            if arrays[name].shape != self._params[name].shape:
                raise ContractViolation(
                    f"shape mismatch for {name!r}: "
                    f"{arrays[name].shape} vs {self._params[name].shape}")
            self._params[name] = Tensor(arrays[name], tracked=True)

    def export_arrays(self) -> Dict[str, np.ndarray]:
        return {name: t.data for name, t in self._params.items()}


def dropout(x: Tensor, p: float, train: bool,
            stream: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; evaluation mode is an exact identity."""
    if not train or p <= 0.0:
        return x
    mask = (stream.random(x.shape) >= p) / (1.0 - p)
    return dropout_mask_apply(x, mask)


class Linear:
    def __init__(self, store: ParamStore, name: str, din: int, dout: int,
                 init: str = "fan_in", bias: bool = True):
        self.store = store
        self.wname = f"{name}/w"
        self.bname = f"{name}/b" if bias else None
        store.create(self.wname, (din, dout), init)
        if bias:
            store.create(self.bname, (dout,), "zeros")

    def __call__(self, x: Tensor) -> Tensor:
        out = matmul(x, self.store[self.wname])
        if self.bname is not None:
            out = add(out, self.store[self.bname])
        return out


class LayerNorm:
    def __init__(self, store: ParamStore, name: str, dim: int):
        self.store = store
        self.gname = f"{name}/gain"
        self.bname = f"{name}/bias"
        store.create(self.gname, (dim,), "ones")
        store.create(self.bname, (dim,), "zeros")

    def __call__(self, x: Tensor) -> Tensor:
        return add(mul(layer_norm(x), self.store[self.gname]),
                   self.store[self.bname])


class MultiHeadAttention:
    def __init__(self, store: ParamStore, name: str, dim: int, heads: int):
        if dim % heads != 0:
            raise ContractViolation(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.dh = dim // heads
        self.q = Linear(store, f"{name}/q", dim, dim)
        self.k = Linear(store, f"{name}/k", dim, dim)
        self.v = Linear(store, f"{name}/v", dim, dim)
        self.o = Linear(store, f"{name}/o", dim, dim)

    def _split(self, x: Tensor, b: int, length: int) -> Tensor:
        return transpose(reshape(x, (b, length, self.heads, self.dh)),
                         (0, 2, 1, 3))

    def __call__(self, query: Tensor, kv: Tensor,
                 mask: Optional[np.ndarray] = None,
                 attn_dropout: float = 0.0, train: bool = False,
                 stream: Optional[np.random.Generator] = None) -> Tensor:
        b, lq, _ = query.shape
        lk = kv.shape[1]
        qh = self._split(self.q(query), b, lq)
        kh = self._split(self.k(kv), b, lk)
        vh = self._split(self.v(kv), b, lk)
        scores = scale(matmul(qh, transpose(kh, (0, 1, 3, 2))),
                       1.0 / math.sqrt(self.dh))
        if mask is not None:
            scores = add(scores, Tensor(mask))
        attn = softmax(scores)
        attn = dropout(attn, attn_dropout, train, stream)
        ctx = matmul(attn, vh)
        merged = reshape(transpose(ctx, (0, 2, 1, 3)), (b, lq, self.dim))
        return self.o(merged)


class FeedForward:
    def __init__(self, store: ParamStore, name: str, dim: int, hidden: int):
        self.fc1 = Linear(store, f"{name}/fc1", dim, hidden)
        self.fc2 = Linear(store, f"{name}/fc2", hidden, dim)

    def __call__(self, x: Tensor, p: float = 0.0, train: bool = False,
                 stream=None) -> Tensor:
        h = gelu(self.fc1(x))
        h = dropout(h, p, train, stream)
        return self.fc2(h)


class EncoderLayer:
    """Pre-norm self-attention + feed-forward block."""

    def __init__(self, store: ParamStore, name: str, dim: int, heads: int,
                 ffn: int):
        self.ln1 = LayerNorm(store, f"{name}/ln1", dim)
        self.attn = MultiHeadAttention(store, f"{name}/attn", dim, heads)
        self.ln2 = LayerNorm(store, f"{name}/ln2", dim)
        self.ffn = FeedForward(store, f"{name}/ffn", dim, ffn)

    def __call__(self, x: Tensor, mask, p: float, train: bool, stream
                 ) -> Tensor:
        n = self.ln1(x)
        h = self.attn(n, n, mask=mask, train=train, attn_dropout=p,
                      stream=stream)
        x = add(x, dropout(h, p, train, stream))
        h = self.ffn(self.ln2(x), p=p, train=train, stream=stream)
        return add(x, dropout(h, p, train, stream))


class DecoderLayer:
    """Pre-norm causal self-attention, cross-attention, feed-forward."""

    def __init__(self, store: ParamStore, name: str, dim: int, heads: int,
                 ffn: int, cross: bool = True):
        self.ln1 = LayerNorm(store, f"{name}/ln1", dim)
        self.self_attn = MultiHeadAttention(store, f"{name}/self", dim, heads)
        self.cross = cross
        if cross:
            self.ln_x = LayerNorm(store, f"{name}/lnx", dim)
            self.cross_attn = MultiHeadAttention(store, f"{name}/cross",
                                                 dim, heads)
        self.ln2 = LayerNorm(store, f"{name}/ln2", dim)
        self.ffn = FeedForward(store, f"{name}/ffn", dim, ffn)

    def __call__(self, x: Tensor, causal_mask, memory: Optional[Tensor],
                 mem_mask, p: float, train: bool, stream) -> Tensor:
        n = self.ln1(x)
        h = self.self_attn(n, n, mask=causal_mask, train=train,
                           attn_dropout=p, stream=stream)
        x = add(x, dropout(h, p, train, stream))
        if self.cross:
            if memory is None:
                raise ContractViolation("decoder layer needs encoder memory")
            h = self.cross_attn(self.ln_x(x), memory, mask=mem_mask,
                                train=train, attn_dropout=p, stream=stream)
            x = add(x, dropout(h, p, train, stream))
        h = self.ffn(self.ln2(x), p=p, train=train, stream=stream)
        return add(x, dropout(h, p, train, stream))


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    """Interleaved sin/cos table; position 0 row is (0, 1, 0, 1, ...)."""
    if dim % 2 != 0:
        raise ContractViolation(f"sinusoidal encoding needs even dim: {dim}")
    pos = np.arange(length, dtype=np.float64)[:, None]
    idx = np.arange(dim // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * idx / dim)
    table = np.zeros((length, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return table


def causal_mask(length: int) -> np.ndarray:
    """(1, 1, L, L) additive mask; -1e9 above the diagonal."""
    mask = np.triu(np.full((length, length), -1e9, dtype=np.float64), k=1)
    return mask[None, None, :, :]


def padding_mask(lengths: np.ndarray, max_len: int) -> np.ndarray:
    """(B, 1, 1, L) additive mask; -1e9 at key positions >= length."""
    ar = np.arange(max_len)[None, :]
    pad = ar >= np.asarray(lengths)[:, None]
    mask = np.where(pad, -1e9, 0.0)
    return mask[:, None, None, :]
