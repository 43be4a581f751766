"""Discrete visual encoder: codebook quantization and stage-1 training."""

from .codebook import Codebook, embed_tokens, quantize, soft_embed
from .model import COMMITMENT_BETA, VqConfig, VqModel
from .token_cache import read_token_cache, write_token_cache
from .training import VqTrainReport, train_vae

__all__ = [
    "COMMITMENT_BETA", "Codebook", "VqConfig", "VqModel", "VqTrainReport",
    "embed_tokens", "quantize", "read_token_cache", "soft_embed",
    "train_vae", "write_token_cache",
]
