"""Convolutional encoder/decoder around the codebook bottleneck.

Stage-1 training optimizes reconstruction + codebook + commitment terms;
there is no adversarial term. The straight-through estimator copies the
decoder gradient across the quantization boundary, and the codebook is
learned by gradient on its own loss term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from ..engine.nn import ParamStore
from ..engine.ops import (add, conv2d, conv2d_transpose, gelu, matmul, mul,
                          reduce_mean, reshape, sub)
from ..engine.tensor import Tensor, as_tensor, no_grad
from ..errors import ConfigurationError
from .codebook import Codebook, embed_tokens_tracked, quantize

COMMITMENT_BETA = 0.25


@dataclass(frozen=True)
class VqConfig:
    k: int = 64
    d: int = 16
    stages: int = 3
    channels: Tuple[int, ...] = (16, 32, 32)
    image_size: int = 32

    @property
    def grid(self) -> int:
        div = 2 ** self.stages
        if self.image_size % div != 0:
            raise ConfigurationError(
                f"image size {self.image_size} not divisible by "
                f"2^{self.stages}")
        return self.image_size // div

    @property
    def tokens(self) -> int:
        return self.grid * self.grid

    def __post_init__(self):
        if len(self.channels) != self.stages:
            raise ConfigurationError(
                f"need {self.stages} channel counts, got {self.channels}")


class VqModel:
    """Encoder, codebook, and decoder with named parameters."""

    def __init__(self, cfg: VqConfig, rng: np.random.Generator):
        cfg.grid  # validate divisibility early
        self.cfg = cfg
        self.store = ParamStore(rng)
        chans = [3, *cfg.channels]
        for i in range(cfg.stages):
            self.store.create(f"fv/enc{i}/w", (2, 2, chans[i], chans[i + 1]),
                              "fan_in")
            self.store.create(f"fv/enc{i}/b", (chans[i + 1],), "zeros")
        self.store.create("fv/to_code/w", (cfg.channels[-1], cfg.d), "fan_in")
        self.store.create("fv/to_code/b", (cfg.d,), "zeros")
        self.store.create("fv/from_code/w", (cfg.d, cfg.channels[-1]),
                          "fan_in")
        self.store.create("fv/from_code/b", (cfg.channels[-1],), "zeros")
        dec_chans = [*cfg.channels[::-1][1:], 3]
        for i in range(cfg.stages):
            cin = cfg.channels[::-1][i]
            self.store.create(f"fv/dec{i}/w", (2, 2, cin, dec_chans[i]),
                              "fan_in")
            # final bias starts at the white background level
            last = i == cfg.stages - 1
            self.store.create(f"fv/dec{i}/b", (dec_chans[i],),
                              "ones" if last else "zeros")
        self.store.create("codebook", (cfg.k, cfg.d), "small")

    def codebook(self) -> Codebook:
        return Codebook(self.store["codebook"].data.copy())

    def encode_features(self, images) -> Tensor:
        """(B, H, W, 3) -> (B, V, d) feature grid in raster order."""
        x = as_tensor(images)
        for i in range(self.cfg.stages):
            x = conv2d(x, self.store[f"fv/enc{i}/w"], stride=2)
            x = gelu(add(x, self.store[f"fv/enc{i}/b"]))
        x = add(matmul(x, self.store["fv/to_code/w"]),
                self.store["fv/to_code/b"])
        g = self.cfg.grid
        return reshape(x, (x.shape[0], g * g, self.cfg.d))

    def decode_image(self, codes: Tensor) -> Tensor:
        """(B, V, d) -> (B, H, W, 3), unclamped."""
        g = self.cfg.grid
        x = reshape(codes, (codes.shape[0], g, g, self.cfg.d))
        x = gelu(add(matmul(x, self.store["fv/from_code/w"]),
                     self.store["fv/from_code/b"]))
        for i in range(self.cfg.stages):
            x = conv2d_transpose(x, self.store[f"fv/dec{i}/w"], stride=2)
            x = add(x, self.store[f"fv/dec{i}/b"])
            if i < self.cfg.stages - 1:
                x = gelu(x)
        return x

    def reconstruct(self, images) -> np.ndarray:
        """Evaluation-mode reconstruction, clamped to [0, 1]."""
        with no_grad():
            c = self.encode_features(images)
            z = quantize(c.data, self.codebook())
            e = self.store["codebook"].data[z]
            out = self.decode_image(Tensor(e))
        return np.clip(out.data, 0.0, 1.0)

    def encode_tokens(self, images) -> np.ndarray:
        """(B, H, W, 3) -> (B, V) discrete token indices."""
        with no_grad():
            c = self.encode_features(images)
        return quantize(c.data, self.codebook())

    def vq_losses(self, images) -> Tuple[Tensor, Dict]:
        """Reconstruction + codebook + commitment losses and diagnostics."""
        images = as_tensor(images)
        c = self.encode_features(images)
        codebook_t = self.store["codebook"]
        z = quantize(c.data, Codebook(codebook_t.data))
        e_z = embed_tokens_tracked(z, codebook_t)
        # straight-through: forward uses e_z, backward passes through c
        st = add(c, Tensor(e_z.data - c.data))
        recon = self.decode_image(st)
        recon_loss = reduce_mean(mul(sub(recon, images),
                                     sub(recon, images)))
        code_diff = sub(Tensor(c.data), e_z)
        codebook_loss = reduce_mean(mul(code_diff, code_diff))
        commit_diff = sub(c, Tensor(e_z.data))
        commit_loss = reduce_mean(mul(commit_diff, commit_diff))
        total = add(add(recon_loss, codebook_loss),
                    mul(commit_loss, Tensor(COMMITMENT_BETA)))
        usage = np.bincount(z.reshape(-1), minlength=self.cfg.k)
        diag = {
            "recon_mse": float(recon_loss.data),
            "codebook_loss": float(codebook_loss.data),
            "commit_loss": float(commit_loss.data),
            "tokens": z,
            "usage": usage,
        }
        return total, diag

    def held_out_mse(self, images) -> float:
        """Per-element reconstruction MSE through the quantized bottleneck."""
        recon = self.reconstruct(images)
        diff = recon - np.asarray(images, dtype=np.float64)
        return float((diff * diff).mean())
