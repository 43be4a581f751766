"""Source-degradation transforms: progressive and entity masking."""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from ..errors import ContractViolation
from ..textpipe.vocab import MASK_TOKEN

Span = Tuple[int, int]


def mask_progressive(words: Sequence[str], k: int) -> List[str]:
    """Replace every word after the first k with the mask token."""
    if k < 0:
        raise ContractViolation(f"k must be >= 0, got {k}")
    return [w if i < k else MASK_TOKEN for i, w in enumerate(words)]


def mask_entities(words: Sequence[str], spans: Sequence[Span], p: float,
                  rng: np.random.Generator) -> List[str]:
    """Replace each visual-entity span with the mask token w.p. p."""
    if not (0.0 <= p <= 1.0):
        raise ContractViolation(f"p must be in [0, 1], got {p}")
    out = list(words)
    for lo, hi in spans:
        if not (0 <= lo < hi <= len(words)):
            raise ContractViolation(f"span ({lo}, {hi}) out of range")
        if rng.random() < p:
            for i in range(lo, hi):
                out[i] = MASK_TOKEN
    return out
