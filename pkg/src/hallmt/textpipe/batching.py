"""Token-budgeted, length-bucketed batching of encoded parallel samples."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ContractViolation
from .vocab import EOS, PAD

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncodedSample:
    """One parallel sample after tokenization."""

    src_ids: Tuple[int, ...]
    tgt_ids: Tuple[int, ...]
    sample_id: int
    image_ref: Optional[int] = None


@dataclass
class TokenBatch:
    """Padded source/target matrices plus true lengths and image refs."""

    src: np.ndarray            # (B, S_max) int64, PAD-padded
    tgt: np.ndarray            # (B, T_max) int64, PAD-padded
    src_lengths: np.ndarray    # (B,)
    tgt_lengths: np.ndarray    # (B,)
    sample_ids: np.ndarray     # (B,)
    image_refs: Optional[np.ndarray] = None

    def __post_init__(self):
        for row, length in zip(self.src, self.src_lengths):
            if row[length - 1] != EOS or np.any(row[length:] != PAD):
                raise ContractViolation("source row not EOS-terminated "
                                        "before PAD padding")
        for row, length in zip(self.tgt, self.tgt_lengths):
            if row[length - 1] != EOS or np.any(row[length:] != PAD):
                raise ContractViolation("target row not EOS-terminated "
                                        "before PAD padding")

    @property
    def size(self) -> int:
        return self.src.shape[0]

    def tgt_weight_mask(self) -> np.ndarray:
        """(B, T_max) 1.0 at real target positions, 0.0 at PAD."""
        ar = np.arange(self.tgt.shape[1])[None, :]
        return (ar < self.tgt_lengths[:, None]).astype(np.float64)


def _pad_rows(rows: List[Tuple[int, ...]]) -> np.ndarray:
    width = max(len(r) for r in rows)
    out = np.full((len(rows), width), PAD, dtype=np.int64)
    for i, r in enumerate(rows):
        out[i, :len(r)] = r
    return out


def make_batch(samples: Sequence[EncodedSample]) -> TokenBatch:
    srcs = [s.src_ids for s in samples]
    tgts = [s.tgt_ids for s in samples]
    refs = [s.image_ref for s in samples]
    return TokenBatch(
        src=_pad_rows(srcs),
        tgt=_pad_rows(tgts),
        src_lengths=np.array([len(s) for s in srcs], dtype=np.int64),
        tgt_lengths=np.array([len(t) for t in tgts], dtype=np.int64),
        sample_ids=np.array([s.sample_id for s in samples], dtype=np.int64),
        image_refs=(None if any(r is None for r in refs)
                    else np.array(refs, dtype=np.int64)),
    )


class BatchIterator:
    """Seed-shuffled stream of length-bucketed TokenBatches.

    Buckets group samples by exact (source length, target length) so
    batches carry no internal padding; the union of emitted samples
    equals the input exactly once per epoch. Samples whose target alone
    exceeds the budget are skipped and counted in ``skipped``.
    """

    def __init__(self, samples: Sequence[EncodedSample], token_budget: int,
                 seed: int):
        if token_budget < 1:
            raise ContractViolation(f"token budget must be >= 1: "
                                    f"{token_budget}")
        self.token_budget = token_budget
        self.seed = seed
        self.skipped = 0
        usable: List[EncodedSample] = []
        for s in samples:
            if len(s.tgt_ids) > token_budget:
                self.skipped += 1
            else:
                usable.append(s)
        if self.skipped:
            logger.warning("batch_iterator: skipped %d samples longer than "
                           "the %d-token budget", self.skipped, token_budget)
        self._samples = usable

    def __iter__(self) -> Iterator[TokenBatch]:
        rng = np.random.default_rng(self.seed)
        buckets: Dict[Tuple[int, int], List[EncodedSample]] = {}
        for s in self._samples:
            buckets.setdefault((len(s.src_ids), len(s.tgt_ids)),
                               []).append(s)
        chunks: List[List[EncodedSample]] = []
        for key in sorted(buckets):
            group = buckets[key]
            order = rng.permutation(len(group))
            group = [group[i] for i in order]
            per_batch = max(1, self.token_budget // key[1])
            for lo in range(0, len(group), per_batch):
                chunks.append(group[lo:lo + per_batch])
        for i in rng.permutation(len(chunks)):
            yield make_batch(chunks[int(i)])


def batch_iterator(samples: Sequence[EncodedSample], token_budget: int,
                   seed: int) -> BatchIterator:
    return BatchIterator(samples, token_budget, seed)
