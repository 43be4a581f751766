"""Visual codebook and nearest-code quantization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine.ops import embedding_gather, matmul
from ..engine.tensor import Tensor
from ..errors import ContractViolation


@dataclass
class Codebook:
    """K x d table of visual code vectors."""

    vectors: np.ndarray  # (K, d) float64

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 2 \
                or self.vectors.shape[1] < 1:
            raise ContractViolation(
                f"codebook must be (K>=2, d>=1), got {self.vectors.shape}")
        if not np.all(np.isfinite(self.vectors)):
            raise ContractViolation("codebook entries must be finite")

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]


def quantize(features: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Index of the nearest code per position; ties to the smallest index.

    features: (..., d) array; returns int64 indices of shape (...,).
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.shape[-1] != codebook.d:
        raise ContractViolation(
            f"feature dim {feats.shape[-1]} != codebook dim {codebook.d}")
    flat = feats.reshape(-1, codebook.d)
    e = codebook.vectors
    # ||c - e||^2 = ||c||^2 - 2 c.e + ||e||^2; the ||c||^2 term is constant
    # per row and cannot change the argmin.
    dist = -2.0 * flat @ e.T + (e * e).sum(axis=1)[None, :]
    return np.argmin(dist, axis=1).reshape(feats.shape[:-1])


def embed_tokens(tokens: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Row gather from the codebook: (...,) indices -> (..., d) vectors."""
    idx = np.asarray(tokens)
    if idx.size and (idx.min() < 0 or idx.max() >= codebook.k):
        raise ContractViolation(
            f"token index out of range [0, {codebook.k})")
    return codebook.vectors[idx]


def embed_tokens_tracked(tokens: np.ndarray, table: Tensor) -> Tensor:
    """Tracked gather for the stage-1 codebook gradient path."""
    return embedding_gather(table, np.asarray(tokens))


def soft_embed(soft, codebook_vectors) -> Tensor:
    """Convex combination of codebook rows: (..., K) @ (K, d).

    ``soft`` rows must sum to 1; gradients flow to ``soft`` only (pass the
    codebook as a plain array or untracked tensor once it is frozen).
    """
    return matmul(soft, codebook_vectors)
