"""Versioned binary cache of per-image visual token indices."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ContractViolation

MAGIC = b"HMTK"
VERSION = 1


def write_token_cache(path, tokens: np.ndarray, k: int) -> None:
    """tokens: (N, V) integer array of code indices in [0, K)."""
    tokens = np.asarray(tokens)
    if tokens.ndim != 2:
        raise ContractViolation(f"token cache needs (N, V), got "
                                f"{tokens.shape}")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= k):
        raise ContractViolation("token index out of range for cache")
    n, v = tokens.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIQ", VERSION, v, k, n))
        fh.write(tokens.astype("<u4").tobytes())


def read_token_cache(path) -> tuple[np.ndarray, int]:
    """Returns (tokens (N, V) int64, K)."""
    with open(Path(path), "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ContractViolation(f"{path}: bad token-cache magic "
                                    f"{magic!r}")
        version, v, k, n = struct.unpack("<IIIQ", fh.read(20))
        if version != VERSION:
            raise ContractViolation(f"{path}: unsupported version {version}")
        data = np.frombuffer(fh.read(n * v * 4), dtype="<u4")
    if data.size != n * v:
        raise ContractViolation(f"{path}: truncated token cache")
    return data.reshape(n, v).astype(np.int64), k
