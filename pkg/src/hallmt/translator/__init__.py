"""Multimodal translation transformer and its losses."""

from .model import ModelConfig, Translator, consistency_loss
from .posenc import grid_indices, positional_encoding, visual_position_rows

__all__ = [
    "ModelConfig", "Translator", "consistency_loss", "grid_indices",
    "positional_encoding", "visual_position_rows",
]
