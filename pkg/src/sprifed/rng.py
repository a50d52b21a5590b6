"""Deterministic counter-based random streams.

Every random draw in the library comes from a Philox generator addressed by a
(seed, path) pair.  Sub-streams derived from distinct paths are independent,
and a draw never depends on execution order, so results are reproducible from
the master seed alone even when client-level work is parallelised.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_to_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    digest = hashlib.blake2s(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def stable_seed(*parts) -> int:
    """Hash arbitrary labels into a 63-bit seed, stable across runs and platforms."""
    h = hashlib.blake2s(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big") >> 1


@dataclass(frozen=True)
class StreamKey:
    """Address of one random sub-stream: a master seed plus a derivation path."""

    seed: int
    path: tuple = ()

    def child(self, *labels) -> "StreamKey":
        """Derive an independent sub-stream for the given labels."""
        return StreamKey(self.seed, self.path + tuple(labels))

    def generator(self) -> np.random.Generator:
        entropy = [self.seed & _MASK64] + [_label_to_int(x) for x in self.path]
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

    def normal(self, scale: float, size=None):
        return self.generator().normal(0.0, scale, size)


def as_key(key) -> StreamKey:
    """Coerce an int seed or StreamKey into a StreamKey."""
    if isinstance(key, StreamKey):
        return key
    return StreamKey(int(key))
