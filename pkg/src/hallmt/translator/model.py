"""Encoder-decoder translation model over text + visual embeddings.

The encoder reads the source token embeddings concatenated with
projected visual code vectors (hard codebook rows or soft convex
combinations; both enter through the same path). The decoder is causal
with cross-attention over the full multimodal memory. With no visual
rows the model reduces exactly to a text-only translator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..engine.nn import (DecoderLayer, EncoderLayer, LayerNorm, Linear,
                         ParamStore, causal_mask, sinusoidal_positions)
from ..engine.ops import (add, concat, embedding_gather, log_softmax, mul,
                          reduce_sum, reshape, scale)
from ..engine.tensor import Tensor
from ..errors import ContractViolation
from ..textpipe.vocab import PAD
from .posenc import visual_position_rows


@dataclass(frozen=True)
class ModelConfig:
    """Transformer dimensions; the desk-scale default is "micro"."""

    enc_layers: int = 2
    dec_layers: int = 2
    dim: int = 64
    ffn_dim: int = 128
    heads: int = 4
    dropout: float = 0.1

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ContractViolation(
                f"dim {self.dim} not divisible by heads {self.heads}")


class Translator:
    """f_T: multimodal encoder-decoder with log-softmax output rows."""

    def __init__(self, cfg: ModelConfig, vocab_size: int, code_dim: int,
                 grid: int, rng: np.random.Generator,
                 store: Optional[ParamStore] = None, visual: bool = True):
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.code_dim = code_dim
        self.grid = grid
        self.visual = visual
        self.store = store if store is not None else ParamStore(rng)
        self.store.create("ft/src_emb", (vocab_size, cfg.dim), "fan_in")
        self.store.create("ft/tgt_emb", (vocab_size, cfg.dim), "fan_in")
        if visual:
            self.vis_proj = Linear(self.store, "ft/vis_proj", code_dim,
                                   cfg.dim)
            self.store.create("ft/rowpos", (grid, cfg.dim), "small")
            self.store.create("ft/colpos", (grid, cfg.dim), "small")
        self.enc_layers = [
            EncoderLayer(self.store, f"ft/enc{i}", cfg.dim, cfg.heads,
                         cfg.ffn_dim)
            for i in range(cfg.enc_layers)]
        self.ln_enc = LayerNorm(self.store, "ft/ln_enc", cfg.dim)
        self.dec_layers = [
            DecoderLayer(self.store, f"ft/dec{i}", cfg.dim, cfg.heads,
                         cfg.ffn_dim, cross=True)
            for i in range(cfg.dec_layers)]
        self.ln_dec = LayerNorm(self.store, "ft/ln_dec", cfg.dim)
        self.out = Linear(self.store, "ft/out", cfg.dim, vocab_size)

    # -- encoder ----------------------------------------------------------

    def encode(self, src: np.ndarray, src_lengths: np.ndarray,
               visual_rows: Optional[Tensor], train: bool = False,
               stream=None) -> Tuple[Tensor, np.ndarray]:
        """Memory over [text; visual] and the cross-attention key mask."""
        src = np.asarray(src, dtype=np.int64)
        src_lengths = np.asarray(src_lengths, dtype=np.int64)
        if src.min() < 0 or src.max() >= self.vocab_size:
            raise ContractViolation("source token id out of range")
        b, s = src.shape
        text = embedding_gather(self.store["ft/src_emb"], src)
        pe = sinusoidal_positions(s, self.cfg.dim)[None, :, :] \
            * (np.arange(s)[None, :] < src_lengths[:, None])[:, :, None]
        text = add(text, Tensor(pe))
        key_valid = np.arange(s)[None, :] < src_lengths[:, None]
        if visual_rows is not None:
            if not self.visual:
                raise ContractViolation(
                    "this translator was built text-only")
            v = visual_rows.shape[1]
            if v != self.grid * self.grid:
                raise ContractViolation(
                    f"expected {self.grid * self.grid} visual rows, got {v}")
            vis = self.vis_proj(visual_rows)
            pos2d = visual_position_rows(self.store["ft/rowpos"],
                                         self.store["ft/colpos"], self.grid)
            vis = add(vis, pos2d)
            x = concat([text, vis], axis=1)
            key_valid = np.concatenate(
                [key_valid, np.ones((b, v), dtype=bool)], axis=1)
        else:
            x = text
        mask = np.where(key_valid, 0.0, -1e9)[:, None, None, :]
        for layer in self.enc_layers:
            x = layer(x, mask, self.cfg.dropout, train, stream)
        return self.ln_enc(x), mask

    # -- decoder ----------------------------------------------------------

    def decode_logprob_rows(self, memory: Tensor, mem_mask: np.ndarray,
                            tgt_in: np.ndarray, train: bool = False,
                            stream=None) -> Tensor:
        """(B, T, vocab) log-softmax rows, teacher-forced on tgt_in."""
        tgt_in = np.asarray(tgt_in, dtype=np.int64)
        if tgt_in.min() < 0 or tgt_in.max() >= self.vocab_size:
            raise ContractViolation("target token id out of range")
        b, t = tgt_in.shape
        x = embedding_gather(self.store["ft/tgt_emb"], tgt_in)
        x = add(x, Tensor(sinusoidal_positions(t, self.cfg.dim)[None, :, :]))
        cmask = causal_mask(t)
        for layer in self.dec_layers:
            x = layer(x, cmask, memory, mem_mask, self.cfg.dropout, train,
                      stream)
        return log_softmax(self.out(self.ln_dec(x)))

    # -- spec-level operations ---------------------------------------------

    def sequence_logprob(self, x_ids, visual_rows: Optional[Tensor], y_ids,
                         train: bool = False, stream=None) -> Tensor:
        """Per-position log-prob rows (T-1, vocab) for one sample."""
        x_ids = np.asarray(x_ids, dtype=np.int64)
        y_ids = np.asarray(y_ids, dtype=np.int64)
        if x_ids.ndim != 1 or y_ids.ndim != 1 or y_ids.size < 2:
            raise ContractViolation("sequence_logprob takes 1-d sequences")
        memory, mask = self.encode(x_ids[None, :],
                                   np.array([x_ids.size]), visual_rows,
                                   train, stream)
        rows = self.decode_logprob_rows(memory, mask, y_ids[None, :-1],
                                        train, stream)
        return reshape(rows, (y_ids.size - 1, self.vocab_size))

    def translation_loss(self, src, src_lengths, visual_rows, tgt,
                         tgt_lengths, train: bool = False, stream=None
                         ) -> Tuple[Tensor, Tensor]:
        """Negative mean gold log-prob over non-PAD target positions.

        Returns (loss, logprob rows) so callers can reuse the rows for
        the consistency term.
        """
        tgt = np.asarray(tgt, dtype=np.int64)
        tgt_lengths = np.asarray(tgt_lengths, dtype=np.int64)
        memory, mask = self.encode(src, src_lengths, visual_rows, train,
                                   stream)
        rows = self.decode_logprob_rows(memory, mask, tgt[:, :-1], train,
                                        stream)
        b, tsteps = tgt.shape[0], tgt.shape[1] - 1
        gold = tgt[:, 1:]
        weight = (np.arange(1, tsteps + 1)[None, :]
                  < tgt_lengths[:, None]).astype(np.float64)
        total = weight.sum()
        if total == 0:
            raise ContractViolation("translation_loss: no non-PAD positions")
        pick = np.zeros((b, tsteps, self.vocab_size))
        rws, cls = np.nonzero(weight)
        pick[rws, cls, gold[rws, cls]] = 1.0 / total
        loss = scale(reduce_sum(mul(rows, Tensor(pick))), -1.0)
        return loss, rows


def consistency_loss(rows_ref: Tensor, rows_stream: Tensor,
                     weight: np.ndarray) -> Tensor:
    """Mean over non-PAD positions of KL(reference || stream).

    ``rows_ref`` and ``rows_stream`` are (B, T, vocab) log-prob rows from
    the two decoding streams computed with identical teacher forcing.
    The reference distribution is treated as a constant: no gradient
    flows through it.
    """
    if rows_ref.shape != rows_stream.shape:
        raise ContractViolation(
            f"stream shape mismatch: {rows_ref.shape} vs "
            f"{rows_stream.shape}")
    weight = np.asarray(weight, dtype=np.float64)
    total = weight.sum()
    if total == 0:
        raise ContractViolation("consistency_loss: no non-PAD positions")
    logp_ref = rows_ref.data
    p_ref = np.exp(logp_ref)
    wnorm = (weight / total)[:, :, None]
    const_term = float((p_ref * logp_ref * wnorm).sum())
    cross = reduce_sum(mul(rows_stream, Tensor(p_ref * wnorm)))
    return add(scale(cross, -1.0), Tensor(np.float64(const_term)))
