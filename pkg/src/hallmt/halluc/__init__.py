"""Autoregressive visual hallucination from source text."""

from .gumbel import (GumbelConfig, anneal_tau, gumbel_softmax_from_logits,
                     gumbel_softmax_sample, sample_gumbel)
from .model import HallucConfig, Hallucinator

__all__ = [
    "GumbelConfig", "HallucConfig", "Hallucinator", "anneal_tau",
    "gumbel_softmax_from_logits", "gumbel_softmax_sample", "sample_gumbel",
]
