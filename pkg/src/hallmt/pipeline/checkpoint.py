"""Versioned binary checkpoint container.

Layout: magic, format version, recipe digest (sha256), step counter,
stage tag, named float64 tensor table, and an RNG state blob. Writes are
atomic (temp file + rename). Averaging produces the elementwise mean of
the parameter tensors and drops optimizer state.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from ..errors import ContractViolation

MAGIC = b"HMTCKPT1"
VERSION = 1
OPT_PREFIX = "opt/"


@dataclass
class Checkpoint:
    digest: bytes
    step: int
    stage: str
    tensors: Dict[str, np.ndarray]
    rng_blob: bytes = b""

    def params(self) -> Dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items()
                if not k.startswith(OPT_PREFIX)}

    def optimizer_state(self) -> Dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items()
                if k.startswith(OPT_PREFIX)}


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<I", VERSION)
    if len(ckpt.digest) != 32:
        raise ContractViolation("recipe digest must be 32 bytes")
    payload += ckpt.digest
    payload += struct.pack("<Q", ckpt.step)
    stage = ckpt.stage.encode("utf-8")
    payload += struct.pack("<H", len(stage)) + stage
    payload += struct.pack("<I", len(ckpt.tensors))
    for name in sorted(ckpt.tensors):
        arr = np.ascontiguousarray(ckpt.tensors[name], dtype=np.float64)
        nb = name.encode("utf-8")
        payload += struct.pack("<H", len(nb)) + nb
        payload += struct.pack("<B", arr.ndim)
        payload += struct.pack(f"<{arr.ndim}I", *arr.shape)
        payload += arr.tobytes()
    payload += struct.pack("<Q", len(ckpt.rng_blob)) + ckpt.rng_blob
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    blob = path.read_bytes()
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(blob):
            raise ContractViolation(f"{path}: truncated checkpoint")
        out = blob[off:off + n]
        off += n
        return out

    if take(len(MAGIC)) != MAGIC:
        raise ContractViolation(f"{path}: bad checkpoint magic")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise ContractViolation(f"{path}: unsupported version {version}")
    digest = take(32)
    (step,) = struct.unpack("<Q", take(8))
    (stage_len,) = struct.unpack("<H", take(2))
    stage = take(stage_len).decode("utf-8")
    (count,) = struct.unpack("<I", take(4))
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(take(size * 8), dtype=np.float64).reshape(shape)
        tensors[name] = arr.copy()
    (rng_len,) = struct.unpack("<Q", take(8))
    rng_blob = take(rng_len)
    return Checkpoint(digest=digest, step=step, stage=stage,
                      tensors=tensors, rng_blob=rng_blob)


def average_checkpoints(ckpts: Sequence[Checkpoint]) -> Checkpoint:
    """Elementwise mean of parameter tensors; optimizer state dropped."""
    if not ckpts:
        raise ContractViolation("average_checkpoints needs >= 1 checkpoint")
    first = ckpts[0]
    names = sorted(first.params())
    for other in ckpts[1:]:
        if other.digest != first.digest:
            raise ContractViolation("checkpoint recipe digests differ")
        if sorted(other.params()) != names:
            raise ContractViolation("checkpoint tensor tables differ")
        for n in names:
            if other.tensors[n].shape != first.tensors[n].shape:
                raise ContractViolation(
                    f"shape mismatch for {n!r}: "
                    f"{other.tensors[n].shape} vs {first.tensors[n].shape}")
    avg = {}
    for n in names:
        acc = np.zeros_like(first.tensors[n])
        for c in ckpts:
            acc += c.tensors[n]
        avg[n] = acc / len(ckpts)
    return Checkpoint(digest=first.digest,
                      step=max(c.step for c in ckpts),
                      stage=first.stage, tensors=avg, rng_blob=b"")
