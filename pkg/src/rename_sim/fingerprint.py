"""Polynomial fingerprints over a prime field.

A segment of an identity list is a bit string. The fingerprint chops it
into limbs, evaluates the limb polynomial at a random point of a prime
field with at least N**8 elements, and applies a random affine shift.
Two distinct equal-length segments collide only if the point is a root
of their difference polynomial, so the collision probability is at most
(number of limbs)/p. The point and shift are drawn from the shared
randomness with a per-iteration label, which gives a fresh function for
every while-loop iteration at O(log N) shared bits.
"""

from __future__ import annotations

from functools import lru_cache

from .randomness import SharedRandomness, derive_int

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_EXTRA_WITNESSES = 20


def _is_probable_prime(x: int) -> bool:
    if x < 2:
        return False
    for q in _SMALL_PRIMES:
        if x % q == 0:
            return x == q
    d = x - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    witnesses = list(_SMALL_PRIMES)
    for i in range(_EXTRA_WITNESSES):
        witnesses.append(2 + derive_int(0, "mr-witness", x, i) % (x - 3))
    for a in witnesses:
        a %= x
        if a < 2:
            continue
        y = pow(a, d, x)
        if y == 1 or y == x - 1:
            continue
        for _ in range(r - 1):
            y = y * y % x
            if y == x - 1:
                break
        else:
            return False
    return True


@lru_cache(maxsize=None)
def field_prime(width: int) -> int:
    """Largest prime below 2**width; fingerprints then fit in width bits."""
    if width < 3:
        raise ValueError("field width too small")
    candidate = (1 << width) - 1
    if candidate % 2 == 0:
        candidate -= 1
    while not _is_probable_prime(candidate):
        candidate -= 2
    return candidate


class SegmentHasher:
    """One hash function instance, fixed by (shared seed, iteration)."""

    def __init__(self, shared: SharedRandomness, iteration: int, width: int):
        self.width = width
        self.prime = field_prime(width)
        p = self.prime
        self.point = 1 + shared.below("segment-hash-point", iteration, p - 1)
        self.scale = 1 + shared.below("segment-hash-scale", iteration, p - 1)
        self.shift = shared.below("segment-hash-shift", iteration, p)
        # limb width below the field size keeps limbs reduced already
        self.limb_w = max(8, width // 2)

    def digest(self, segment_bits: int, length: int) -> int:
        p = self.prime
        r = self.point
        lw = self.limb_w
        mask = (1 << lw) - 1
        acc = length % p
        # stream limbs low-end first through a byte buffer; repeatedly
        # shifting a multi-thousand-bit segment would be quadratic
        nbytes = (segment_bits.bit_length() + 7) >> 3
        remaining = (segment_bits.bit_length() + lw - 1) // lw
        ba = segment_bits.to_bytes(nbytes, "little")
        buf = 0
        bits = 0
        for off in range(0, nbytes, 64):
            chunk = ba[off:off + 64]
            buf |= int.from_bytes(chunk, "little") << bits
            bits += 8 * len(chunk)
            while bits >= lw and remaining > 1:
                acc = (acc * r + (buf & mask)) % p
                buf >>= lw
                bits -= lw
                remaining -= 1
        if remaining:
            # the last limb; byte padding above the top bit adds nothing
            acc = (acc * r + buf) % p
        return (acc * self.scale + self.shift) % p
