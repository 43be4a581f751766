"""Vocabulary with reserved control tokens and BPE-backed text codec."""

from __future__ import annotations

from typing import Dict, Iterable, List, Sequence, Tuple

from ..errors import ConfigurationError, ContractViolation
from .bpe import WORD_END, BpeEncoder, BpeMerges

PAD, BOS, EOS, UNK, MASK = 0, 1, 2, 3, 4
MASK_TOKEN = "<v>"
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>", MASK_TOKEN)


class Vocabulary:
    """Bijective token <-> id map; reserved ids occupy the lowest slots."""

    def __init__(self, subwords: Sequence[str]):
        self._token_to_id: Dict[str, int] = {}
        self._id_to_token: List[str] = []
        for tok in RESERVED:
            self._add(tok)
        for tok in subwords:
            if tok in self._token_to_id:
                raise ContractViolation(f"duplicate vocabulary token {tok!r}")
            self._add(tok)

    def _add(self, token: str) -> None:
        self._token_to_id[token] = len(self._id_to_token)
        self._id_to_token.append(token)

    def __len__(self) -> int:
        return len(self._id_to_token)

    def id_of(self, token: str) -> int:
        return self._token_to_id.get(token, UNK)

    def token_of(self, idx: int) -> str:
        if not (0 <= idx < len(self._id_to_token)):
            raise ContractViolation(f"token id {idx} out of range")
        return self._id_to_token[idx]

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def tokens(self) -> List[str]:
        return list(self._id_to_token)


def build_vocabulary(corpus: Iterable[str], merges: BpeMerges) -> Vocabulary:
    """Vocabulary = reserved tokens + distinct subwords of the corpus."""
    encoder = BpeEncoder(merges)
    subwords = set()
    for sentence in corpus:
        for word in sentence.split():
            if word == MASK_TOKEN:
                continue
            subwords.update(encoder.encode_word(word))
    return Vocabulary(sorted(subwords))


class TextCodec:
    """encode/decode between sentence strings and token id sequences."""

    def __init__(self, merges: BpeMerges, vocab: Vocabulary):
        self.merges = merges
        self.vocab = vocab
        self._encoder = BpeEncoder(merges)

    def encode(self, sentence: str) -> List[int]:
        """BOS + subword ids + EOS; the mask token is never split."""
        ids = [BOS]
        for word in sentence.split():
            if word == MASK_TOKEN:
                ids.append(MASK)
                continue
            for piece in self._encoder.encode_word(word):
                ids.append(self.vocab.id_of(piece))
        ids.append(EOS)
        return ids

    def decode(self, ids: Sequence[int]) -> str:
        """Inverse of encode on in-vocabulary text; drops control tokens."""
        chunks: List[str] = []
        for idx in ids:
            if idx in (PAD, BOS, EOS):
                continue
            if idx == MASK:
                chunks.append(MASK_TOKEN + WORD_END)
                continue
            tok = self.vocab.token_of(idx)
            chunks.append(tok)
        return "".join(chunks).replace(WORD_END, " ").strip()


def encode_text(sentence: str, merges: BpeMerges, vocab: Vocabulary
                ) -> List[int]:
    return TextCodec(merges, vocab).encode(sentence)


def decode_text(ids: Sequence[int], merges: BpeMerges, vocab: Vocabulary
                ) -> str:
    return TextCodec(merges, vocab).decode(ids)
