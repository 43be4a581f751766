"""Tokenization, vocabulary management, and batching."""

from .batching import (BatchIterator, EncodedSample, TokenBatch,
                       batch_iterator, make_batch)
from .bpe import BpeEncoder, BpeMerges, learn_bpe, load_merges, save_merges
from .vocab import (BOS, EOS, MASK, MASK_TOKEN, PAD, RESERVED, UNK, TextCodec,
                    Vocabulary, build_vocabulary, decode_text, encode_text)

__all__ = [
    "BOS", "BatchIterator", "BpeEncoder", "BpeMerges", "EOS",
    "EncodedSample", "MASK", "MASK_TOKEN", "PAD", "RESERVED", "TextCodec",
    "TokenBatch", "UNK", "Vocabulary", "batch_iterator", "build_vocabulary",
    "decode_text", "encode_text", "learn_bpe", "load_merges", "make_batch",
    "save_merges",
]
