"""Named deterministic RNG streams.

Every stochastic choice (init, dropout, Gumbel noise, shuffling, masking)
draws from a stream addressed by name. Stream states are serializable so
checkpoints can freeze and restore the exact position of every stream.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np


def _name_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngHub:
    """Factory and registry for named PCG64 streams under one root seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        gen = self._streams.get(name)
        if gen is None:
            seq = np.random.SeedSequence([self.seed, _name_key(name)])
            gen = np.random.Generator(np.random.PCG64(seq))
            self._streams[name] = gen
        return gen

    def derived_seed(self, name: str) -> int:
        """A stable 63-bit integer seed for external consumers."""
        return (self.seed * 0x9E3779B97F4A7C15 + _name_key(name)) % (2**63)

    def state_blob(self) -> bytes:
        states = {name: gen.bit_generator.state
                  for name, gen in sorted(self._streams.items())}
        return json.dumps({"seed": self.seed, "streams": states},
                          sort_keys=True).encode("utf-8")

    def restore_blob(self, blob: bytes) -> None:
        payload = json.loads(blob.decode("utf-8"))
        self.seed = payload["seed"]
        self._streams.clear()
        for name, state in payload["streams"].items():
            gen = np.random.Generator(np.random.PCG64())
            gen.bit_generator.state = state
            self._streams[name] = gen
