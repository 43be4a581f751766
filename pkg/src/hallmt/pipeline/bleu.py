"""Corpus-level BLEU-4: clipped n-gram precision with brevity penalty.

Counts aggregate over the whole corpus before the geometric mean; there
is no smoothing, so a zero precision at any order yields BLEU 0.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import List, Sequence

from ..errors import ContractViolation

MAX_ORDER = 4


def _ngrams(tokens: Sequence[str], order: int) -> Counter:
    return Counter(tuple(tokens[i:i + order])
                   for i in range(len(tokens) - order + 1))


def corpus_bleu(hypotheses: Sequence[Sequence[str]],
                references: Sequence[Sequence[str]]) -> float:
    """BLEU in [0, 100] over parallel token-sequence lists."""
    if len(hypotheses) != len(references):
        raise ContractViolation(
            f"hypothesis/reference count mismatch: "
            f"{len(hypotheses)} vs {len(references)}")
    if not references or any(len(r) == 0 for r in references):
        raise ContractViolation("references must be non-empty")
    matched = [0] * MAX_ORDER
    total = [0] * MAX_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = list(hyp)
        ref = list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, MAX_ORDER + 1):
            hgrams = _ngrams(hyp, n)
            rgrams = _ngrams(ref, n)
            total[n - 1] += max(len(hyp) - n + 1, 0)
            matched[n - 1] += sum(min(count, rgrams[g])
                                  for g, count in hgrams.items())
    if hyp_len == 0:
        return 0.0
    log_precision = 0.0
    for n in range(MAX_ORDER):
        if total[n] == 0 or matched[n] == 0:
            return 0.0
        log_precision += math.log(matched[n] / total[n])
    log_precision /= MAX_ORDER
    brevity = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_precision)
