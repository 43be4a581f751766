"""Byte-pair encoding over whitespace-separated words.

Merges are learned from word frequencies with an end-of-word marker on
the final character, greedy highest-count pair first, ties broken by
lexicographic order of the pair. Reserved tokens (e.g. the mask token)
are atomic and never participate in merges.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

from ..errors import ConfigurationError, ContractViolation

WORD_END = "</w>"


@dataclass(frozen=True)
class BpeMerges:
    """Ordered merge rules; position defines priority (earlier = higher)."""

    rules: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        if len(set(self.rules)) != len(self.rules):
            raise ContractViolation("duplicate BPE merge rules")

    def rank(self) -> Dict[Tuple[str, str], int]:
        return {pair: i for i, pair in enumerate(self.rules)}


def _word_symbols(word: str) -> Tuple[str, ...]:
    chars = list(word)
    chars[-1] = chars[-1] + WORD_END
    return tuple(chars)


def learn_bpe(corpus: Sequence[str], num_merges: int,
              reserved: Sequence[str] = ()) -> BpeMerges:
    """Learn merge rules by greedy highest-frequency pair merging.

    num_merges == 0 yields character-level tokenization. Ties between
    equally frequent pairs go to the lexicographically smaller pair.
    """
    if not corpus:
        raise ConfigurationError("learn_bpe needs a non-empty corpus")
    if num_merges < 0:
        raise ConfigurationError(f"num_merges must be >= 0: {num_merges}")
    reserved_set = set(reserved)
    word_freq: Counter = Counter()
    for sentence in corpus:
        for word in sentence.split():
            if word not in reserved_set:
                word_freq[word] += 1
    words = {w: _word_symbols(w) for w in word_freq}

    rules: List[Tuple[str, str]] = []
    for _ in range(num_merges):
        pair_counts: Counter = Counter()
        for w, symbols in words.items():
            freq = word_freq[w]
            for a, b in zip(symbols, symbols[1:]):
                pair_counts[(a, b)] += freq
        if not pair_counts:
            break
        best = min(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        rules.append(best)
        merged = best[0] + best[1]
        for w, symbols in words.items():
            if best[0] not in symbols:
                continue
            out: List[str] = []
            i = 0
            while i < len(symbols):
                if (i + 1 < len(symbols) and symbols[i] == best[0]
                        and symbols[i + 1] == best[1]):
                    out.append(merged)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            words[w] = tuple(out)
    return BpeMerges(tuple(rules))


class BpeEncoder:
    """Applies learned merges to words, with per-word caching."""

    def __init__(self, merges: BpeMerges):
        self.merges = merges
        self._rank = merges.rank()
        self._encode_word = lru_cache(maxsize=65536)(self._encode_word_raw)

    def _encode_word_raw(self, word: str) -> Tuple[str, ...]:
        symbols = list(_word_symbols(word))
        while len(symbols) > 1:
            ranked = [(self._rank[p], i)
                      for i, p in enumerate(zip(symbols, symbols[1:]))
                      if p in self._rank]
            if not ranked:
                break
            _, i = min(ranked)
            symbols[i:i + 2] = [symbols[i] + symbols[i + 1]]
        return tuple(symbols)

    def encode_word(self, word: str) -> Tuple[str, ...]:
        return self._encode_word(word)


def save_merges(path, merges: BpeMerges) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a, b in merges.rules:
            fh.write(f"{a} {b}\n")


def load_merges(path) -> BpeMerges:
    rules = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            a, b = line.split(" ")
            rules.append((a, b))
    return BpeMerges(tuple(rules))
