"""Deterministic beam search with length-normalized scoring.

Finished hypotheses score logprob / |Y|^alpha where |Y| counts generated
tokens including EOS (BOS excluded). Ties break toward the smaller token
id sequence. If nothing reaches EOS within the length limit the best
unfinished hypothesis is returned with a truncation flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from ..errors import ContractViolation

# decoder_step(prefixes (N, t), sentence_index (N,)) -> (N, vocab) logprobs
DecoderStep = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BeamConfig:
    beam: int = 5
    alpha: float = 1.0
    max_len: int = 24

    def __post_init__(self):
        if self.beam < 1:
            raise ContractViolation(f"beam must be >= 1, got {self.beam}")
        if self.alpha < 0:
            raise ContractViolation(f"alpha must be >= 0, got {self.alpha}")
        if self.max_len < 1:
            raise ContractViolation(f"max_len must be >= 1: {self.max_len}")


@dataclass(frozen=True)
class Hypothesis:
    ids: Tuple[int, ...]   # generated tokens after BOS (may include EOS)
    logprob: float
    score: float
    truncated: bool


def _final_score(logprob: float, length: int, alpha: float) -> float:
    return logprob / (length ** alpha) if length else logprob


def beam_search_group(decoder_step: DecoderStep, n_sentences: int,
                      bos: int, eos: int, vocab_size: int,
                      cfg: BeamConfig) -> List[Hypothesis]:
    """Beam search over a group of sentences with one shared step fn."""
    alive: List[List[Tuple[Tuple[int, ...], float]]] = [
        [((bos,), 0.0)] for _ in range(n_sentences)]
    finished: List[List[Tuple[float, Tuple[int, ...], float]]] = [
        [] for _ in range(n_sentences)]

    for _ in range(cfg.max_len):
        rows: List[Tuple[int, ...]] = []
        sent_of_row: List[int] = []
        for g, hyps in enumerate(alive):
            for seq, _ in hyps:
                rows.append(seq)
                sent_of_row.append(g)
        if not rows:
            break
        prefix = np.array(rows, dtype=np.int64)
        logprobs = decoder_step(prefix, np.array(sent_of_row))
        if logprobs.shape != (len(rows), vocab_size):
            raise ContractViolation(
                f"decoder step returned {logprobs.shape}, expected "
                f"({len(rows)}, {vocab_size})")
        row = 0
        for g in range(n_sentences):
            candidates = []
            for seq, lp in alive[g]:
                lps = logprobs[row]
                row += 1
                for k in range(vocab_size):
                    candidates.append((lp + float(lps[k]), seq + (k,)))
            # sort: score desc, then lexicographically smaller sequence
            candidates.sort(key=lambda c: (-c[0], c[1]))
            kept = candidates[:cfg.beam]
            new_alive = []
            for lp, seq in kept:
                gen_len = len(seq) - 1
                if seq[-1] == eos:
                    finished[g].append(
                        (_final_score(lp, gen_len, cfg.alpha), seq, lp))
                else:
                    new_alive.append((seq, lp))
            # keep the alive set lexicographically ordered so candidate
            # generation order stays deterministic next step
            new_alive.sort(key=lambda h: h[0])
            alive[g] = new_alive

    results: List[Hypothesis] = []
    for g in range(n_sentences):
        if finished[g]:
            finished[g].sort(key=lambda f: (-f[0], f[1]))
            score, seq, lp = finished[g][0]
            results.append(Hypothesis(ids=tuple(seq[1:]), logprob=lp,
                                      score=score, truncated=False))
        elif alive[g]:
            ranked = sorted(
                ((_final_score(lp, len(seq) - 1, cfg.alpha), seq, lp)
                 for seq, lp in alive[g]), key=lambda f: (-f[0], f[1]))
            score, seq, lp = ranked[0]
            results.append(Hypothesis(ids=tuple(seq[1:]), logprob=lp,
                                      score=score, truncated=True))
        else:
            results.append(Hypothesis(ids=(), logprob=float("-inf"),
                                      score=float("-inf"), truncated=True))
    return results


def enumerate_best(decoder_step: DecoderStep, bos: int, eos: int,
                   vocab_size: int, cfg: BeamConfig) -> Hypothesis:
    """Exhaustive oracle: scores every sequence up to max_len.

    Intended for tiny vocabularies in tests; applies the same scoring
    and tie-breaking rules as beam search.
    """
    finished: List[Tuple[float, Tuple[int, ...], float]] = []
    unfinished: List[Tuple[float, Tuple[int, ...], float]] = []
    frontier: List[Tuple[Tuple[int, ...], float]] = [((bos,), 0.0)]
    for depth in range(1, cfg.max_len + 1):
        nxt: List[Tuple[Tuple[int, ...], float]] = []
        prefix = np.array([seq for seq, _ in frontier], dtype=np.int64)
        logprobs = decoder_step(prefix, np.zeros(len(frontier), dtype=int))
        for (seq, lp), lps in zip(frontier, logprobs):
            for k in range(vocab_size):
                cand = (seq + (k,), lp + float(lps[k]))
                if k == eos:
                    finished.append(
                        (_final_score(cand[1], depth, cfg.alpha), cand[0],
                         cand[1]))
                elif depth == cfg.max_len:
                    unfinished.append(
                        (_final_score(cand[1], depth, cfg.alpha), cand[0],
                         cand[1]))
                else:
                    nxt.append(cand)
        frontier = nxt
        if not frontier:
            break
    pool = finished if finished else unfinished
    pool.sort(key=lambda f: (-f[0], f[1]))
    score, seq, lp = pool[0]
    return Hypothesis(ids=tuple(seq[1:]), logprob=lp, score=score,
                      truncated=not bool(finished))
