"""Seeded randomness with shared and per-node private streams.

All draws derive from a single master seed through SHA-256, so replays
are bit-identical across runs and platforms. Shared draws are pure
functions of (master_seed, kind, index): every node that evaluates the
same labeled draw sees the same bits, which models a common random
string. Private streams are independent per node id.
"""

from __future__ import annotations

import hashlib
import random

_UNIT_BITS = 53


def derive_int(master_seed: int, *labels) -> int:
    """256-bit integer derived from the master seed and a label path."""
    h = hashlib.sha256()
    h.update(b"rename-sim.v1")
    h.update(str(master_seed).encode())
    for label in labels:
        h.update(b"|")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "big")


def private_stream(master_seed: int, node_id: int) -> random.Random:
    """Independent deterministic stream for one node."""
    return random.Random(derive_int(master_seed, "node", node_id))


class SharedRandomness:
    """Common random string addressable by (kind, index) labels."""

    def __init__(self, master_seed: int):
        self.master_seed = master_seed

    def bits(self, kind: str, index, width: int) -> int:
        """Uniform integer in [0, 2**width)."""
        if width <= 0:
            raise ValueError("width must be positive")
        out = 0
        produced = 0
        block = 0
        while produced < width:
            chunk = derive_int(self.master_seed, "shared", kind, index, block)
            out = (out << 256) | chunk
            produced += 256
            block += 1
        return out >> (produced - width)

    def unit(self, kind: str, index) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return self.bits(kind, index, _UNIT_BITS) / (1 << _UNIT_BITS)

    def coin(self, kind: str, index, prob: float) -> bool:
        """True with the given probability; prob >= 1 always hits."""
        if prob >= 1.0:
            return True
        if prob <= 0.0:
            return False
        return self.unit(kind, index) < prob

    def below(self, kind: str, index, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection over a padded width."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        width = bound.bit_length() + 64
        return self.bits(kind, index, width) % bound
