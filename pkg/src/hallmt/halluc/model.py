"""Autoregressive model of the concatenated text + visual token stream.

One shared embedding table covers text ids followed by a block of K
visual code ids. Text positions get sinusoidal encodings; visual
positions get learned row+column embeddings over the token grid. The
model predicts the next text token at text positions (softmax over the
text block) and the next visual token at visual positions (softmax over
the visual block), which yields the joint sequence likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..engine.nn import (DecoderLayer, LayerNorm, Linear, ParamStore,
                         causal_mask, sinusoidal_positions)
from ..engine.ops import (add, embedding_gather, gather_rows, log_softmax,
                          mul, reduce_mean, reduce_sum, scale, slice_last,
                          softmax)
from ..engine.tensor import Tensor, no_grad
from ..errors import ContractViolation
from ..textpipe.vocab import PAD


@dataclass(frozen=True)
class HallucConfig:
    text_vocab: int
    k: int
    grid: int
    dim: int = 64
    ffn_dim: int = 128
    heads: int = 4
    layers: int = 2
    dropout: float = 0.1

    @property
    def tokens(self) -> int:
        return self.grid * self.grid

    @property
    def span(self) -> int:
        return self.text_vocab + self.k


class Hallucinator:
    """Decoder-only transformer over [text tokens; visual tokens]."""

    def __init__(self, cfg: HallucConfig, rng: np.random.Generator,
                 store: Optional[ParamStore] = None):
        self.cfg = cfg
        self.store = store if store is not None else ParamStore(rng)
        self.store.create("fh/emb", (cfg.span, cfg.dim), "fan_in")
        self.store.create("fh/rowpos", (cfg.grid, cfg.dim), "small")
        self.store.create("fh/colpos", (cfg.grid, cfg.dim), "small")
        self.layers = [
            DecoderLayer(self.store, f"fh/layer{i}", cfg.dim, cfg.heads,
                         cfg.ffn_dim, cross=False)
            for i in range(cfg.layers)
        ]
        self.ln_f = LayerNorm(self.store, "fh/ln_f", cfg.dim)
        self.out = Linear(self.store, "fh/out", cfg.dim, cfg.span)

    # -- input assembly -------------------------------------------------

    def _combined(self, src: np.ndarray, lengths: np.ndarray,
                  z: Optional[np.ndarray]) -> Tuple[np.ndarray, dict]:
        b, s = src.shape
        v = self.cfg.tokens if z is not None else 0
        total = s + v
        ids = np.full((b, total), PAD, dtype=np.int64)
        ids[:, :s] = src
        slot = np.arange(total)[None, :]
        lens = lengths[:, None]
        is_text = slot < lens
        if z is not None:
            if z.shape != (b, self.cfg.tokens):
                raise ContractViolation(
                    f"visual tokens must be (B, {self.cfg.tokens}), "
                    f"got {z.shape}")
            if z.min() < 0 or z.max() >= self.cfg.k:
                raise ContractViolation("visual token index out of range")
            vis_idx = lens + np.arange(v)[None, :]
            np.put_along_axis(ids, vis_idx, z + self.cfg.text_vocab, axis=1)
            is_vis = (slot >= lens) & (slot < lens + v)
        else:
            is_vis = np.zeros_like(is_text)
        valid = is_text | is_vis
        geom = {"is_text": is_text, "is_vis": is_vis, "valid": valid,
                "slot": slot, "total": total, "v": v}
        return ids, geom

    def _hidden(self, src: np.ndarray, lengths: np.ndarray,
                z: Optional[np.ndarray], train: bool, stream) -> Tensor:
        src = np.asarray(src, dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)
        if src.min() < 0 or src.max() >= self.cfg.text_vocab:
            raise ContractViolation("text token id out of range")
        ids, geom = self._combined(src, lengths, z)
        total = geom["total"]
        x = embedding_gather(self.store["fh/emb"], ids)
        pe = sinusoidal_positions(total, self.cfg.dim)[None, :, :] \
            * geom["is_text"][:, :, None]
        x = add(x, Tensor(pe))
        if geom["v"]:
            j_vis = np.clip(geom["slot"] - lengths[:, None], 0,
                            self.cfg.tokens - 1)
            vmask = geom["is_vis"][:, :, None].astype(np.float64)
            rpos = embedding_gather(self.store["fh/rowpos"],
                                    j_vis // self.cfg.grid)
            cpos = embedding_gather(self.store["fh/colpos"],
                                    j_vis % self.cfg.grid)
            x = add(x, mul(add(rpos, cpos), Tensor(vmask)))
        pad_keys = np.where(geom["valid"], 0.0, -1e9)[:, None, None, :]
        mask = causal_mask(total) + pad_keys
        for layer in self.layers:
            x = layer(x, mask, None, None, self.cfg.dropout, train, stream)
        return self.ln_f(x)

    # -- likelihoods ----------------------------------------------------

    def forward_scores(self, src: np.ndarray, lengths: np.ndarray,
                       z: np.ndarray, train: bool = False, stream=None
                       ) -> Dict[str, Tensor]:
        """One forward pass yielding per-sample joint log-likelihoods and
        the visual-position logits (teacher-forced on true z)."""
        src = np.asarray(src, dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)
        z = np.asarray(z, dtype=np.int64)
        b, s = src.shape
        hidden = self._hidden(src, lengths, z, train, stream)
        logits = self.out(hidden)

        # text predictions: slot t predicts src[t+1] for t+1 < length
        text_logits = log_softmax(
            slice_last(logits, 0, self.cfg.text_vocab))
        gold = src[:, 1:s]
        valid = (np.arange(1, s)[None, :] < lengths[:, None])
        onehot = np.zeros((b, s - 1, self.cfg.text_vocab))
        rows, cols = np.nonzero(valid)
        onehot[rows, cols, gold[rows, cols]] = 1.0
        text_rows = _first_slots(text_logits, s - 1)
        text_ll = reduce_sum(reduce_sum(mul(text_rows, Tensor(onehot)),
                                        axis=2), axis=1)

        # visual predictions: slot length-1+j predicts z[j]
        vis_slots = lengths[:, None] - 1 + np.arange(self.cfg.tokens)[None, :]
        vis_rows = gather_rows(logits, vis_slots)
        vis_logits = slice_last(vis_rows, self.cfg.text_vocab, self.cfg.span)
        vis_logprobs = log_softmax(vis_logits)
        vhot = np.zeros((b, self.cfg.tokens, self.cfg.k))
        bi = np.repeat(np.arange(b), self.cfg.tokens)
        ji = np.tile(np.arange(self.cfg.tokens), b)
        vhot[bi, ji, z.reshape(-1)] = 1.0
        vis_ll = reduce_sum(reduce_sum(mul(vis_logprobs, Tensor(vhot)),
                                       axis=2), axis=1)

        joint = add(text_ll, vis_ll)
        return {"joint": joint, "visual_logits": vis_logits,
                "visual_logprobs": vis_logprobs}

    def joint_logprob(self, x_ids, z, train: bool = False, stream=None
                      ) -> Tensor:
        """Joint log-likelihood of one (text, visual-token) pair."""
        x_ids = np.asarray(x_ids, dtype=np.int64)
        if x_ids.ndim != 1 or x_ids.size < 2:
            raise ContractViolation("x must be a 1-d id sequence (>=2 ids)")
        z = np.asarray(z, dtype=np.int64)
        if z.shape != (self.cfg.tokens,):
            raise ContractViolation(
                f"z must have length {self.cfg.tokens}, got {z.shape}")
        scores = self.forward_scores(x_ids[None, :],
                                     np.array([x_ids.size]), z[None, :],
                                     train, stream)
        return reduce_sum(scores["joint"])

    def hallucination_loss(self, src, lengths, z, train: bool = False,
                           stream=None) -> Tuple[Tensor, Dict[str, Tensor]]:
        """Mean over the batch of the negative joint log-likelihood."""
        scores = self.forward_scores(src, lengths, z, train, stream)
        loss = scale(reduce_mean(scores["joint"]), -1.0)
        return loss, scores

    # -- inference ------------------------------------------------------

    def decode(self, src: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        """Greedy visual decoding; conditioning replaced by own outputs.

        Pure function of (src, params); ties go to the smallest index.
        """
        src = np.asarray(src, dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)
        b = src.shape[0]
        zhat = np.zeros((b, 0), dtype=np.int64)
        for j in range(self.cfg.tokens):
            logits = self.next_visual_logits(src, lengths, zhat)
            zhat = np.concatenate(
                [zhat, logits.argmax(axis=1)[:, None]], axis=1)
        return zhat

    def next_visual_logits(self, src: np.ndarray, lengths: np.ndarray,
                           z_prefix: np.ndarray) -> np.ndarray:
        """Logits over the K codes for visual position len(z_prefix)."""
        src = np.asarray(src, dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)
        z_prefix = np.asarray(z_prefix, dtype=np.int64)
        b, s = src.shape
        j = z_prefix.shape[1]
        ids = np.full((b, s + j), PAD, dtype=np.int64)
        ids[:, :s] = src
        if j:
            vis_idx = lengths[:, None] + np.arange(j)[None, :]
            np.put_along_axis(ids, vis_idx, z_prefix + self.cfg.text_vocab,
                              axis=1)
        lens_now = lengths + j
        with no_grad():
            hidden = self._hidden_prefix(ids, lengths, lens_now, j)
            rows = gather_rows(hidden, (lens_now - 1)[:, None])
            logits = self.out(rows)
        return logits.data[:, 0, self.cfg.text_vocab:self.cfg.span]

    def _hidden_prefix(self, ids: np.ndarray, text_lengths: np.ndarray,
                       lens_now: np.ndarray, j: int) -> Tensor:
        """Forward over a text + partial-visual prefix (decode path)."""
        b, total = ids.shape
        slot = np.arange(total)[None, :]
        is_text = slot < text_lengths[:, None]
        is_vis = (slot >= text_lengths[:, None]) & (slot < lens_now[:, None])
        x = embedding_gather(self.store["fh/emb"], ids)
        pe = sinusoidal_positions(total, self.cfg.dim)[None, :, :] \
            * is_text[:, :, None]
        x = add(x, Tensor(pe))
        if j:
            j_vis = np.clip(slot - text_lengths[:, None], 0,
                            self.cfg.tokens - 1)
            vmask = is_vis[:, :, None].astype(np.float64)
            rpos = embedding_gather(self.store["fh/rowpos"],
                                    j_vis // self.cfg.grid)
            cpos = embedding_gather(self.store["fh/colpos"],
                                    j_vis % self.cfg.grid)
            x = add(x, mul(add(rpos, cpos), Tensor(vmask)))
        pad_keys = np.where(is_text | is_vis, 0.0, -1e9)[:, None, None, :]
        mask = causal_mask(total) + pad_keys
        for layer in self.layers:
            x = layer(x, mask, None, None, 0.0, False, None)
        return self.ln_f(x)


def _first_slots(rows: Tensor, count: int) -> Tensor:
    """rows[:, :count, :] as a tracked op."""
    from ..engine.ops import gather_rows as _gr
    b = rows.shape[0]
    idx = np.tile(np.arange(count)[None, :], (b, 1))
    return _gr(rows, idx)
