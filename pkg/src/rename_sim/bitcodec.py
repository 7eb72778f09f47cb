"""Canonical fixed-width message encoding.

Every message is a 4-bit type tag followed by fixed-width big-endian
fields. Widths are derived from the id namespace size N and the target
namespace size n:

  id fields            ceil(log2 N) bits, stored as value-1
  interval endpoints   ceil(log2 n) bits, stored as value-1
  depth / exponent     enough bits for values up to 3*ceil(log2 n)+2
  fingerprints         8*ceil(log2 N) bits
  one-counts           enough bits for values up to n

Encoding and decoding are exact inverses; out-of-range fields raise
EncodeError. Each type also carries a budget constant c such that the
total size never exceeds c*ceil(log2 N), which keeps every message at
O(log N) bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .errors import EncodeError


def ceil_log2(x: int) -> int:
    if x < 1:
        raise ValueError("ceil_log2 needs x >= 1")
    return (x - 1).bit_length()


class MsgType(IntEnum):
    ELECT_NOTIFY = 0       # crash committee announcement, body-free
    STATUS_REPORT = 1      # crash: (id, lo, hi, d, p)
    COMMITTEE_RESPONSE = 2  # crash: (id, lo, hi, d, p)
    ELECT = 3              # byz committee announcement: (id,)
    ID_ANNOUNCE = 4        # byz identity announcement: (id,)
    VAL_INIT = 5           # validator round 1: (value,)
    VAL_ECHO = 6           # validator round 2: (value,)
    DIFF_REPORT = 7        # byz mismatch bit: (bit,)
    CONS_VOTE = 8          # consensus vote: (bit,)
    CONS_LEADER = 9        # consensus leader tiebreak: (bit,)
    NEW = 10               # new identity grant: (nid or None,)


# c such that size_bits(t) <= c * ceil(log2 N) for every legal (n, N).
BIT_BUDGET = {
    MsgType.ELECT_NOTIFY: 2,
    MsgType.STATUS_REPORT: 10,
    MsgType.COMMITTEE_RESPONSE: 10,
    MsgType.ELECT: 3,
    MsgType.ID_ANNOUNCE: 3,
    MsgType.VAL_INIT: 12,
    MsgType.VAL_ECHO: 12,
    MsgType.DIFF_REPORT: 3,
    MsgType.CONS_VOTE: 3,
    MsgType.CONS_LEADER: 3,
    MsgType.NEW: 4,
}

TAG_WIDTH = 4


@dataclass(frozen=True)
class WidthTable:
    """Field widths for a given (n, N) namespace pair."""

    n: int
    N: int
    id_w: int
    slot_w: int
    depth_w: int
    fp_w: int
    count_w: int

    @classmethod
    def for_namespace(cls, n: int, N: int) -> "WidthTable":
        if n < 2 or N < n:
            raise EncodeError(f"need 2 <= n <= N, got n={n} N={N}")
        id_w = ceil_log2(N)
        return cls(
            n=n,
            N=N,
            id_w=id_w,
            slot_w=ceil_log2(n),
            depth_w=(3 * ceil_log2(n) + 2).bit_length(),
            fp_w=8 * id_w,
            count_w=n.bit_length(),
        )

    @property
    def value_w(self) -> int:
        # validator value in the renaming protocol: fingerprint + one-count
        return self.fp_w + self.count_w


def _field_layout(mtype: MsgType, w: WidthTable) -> tuple[tuple[str, int, int], ...]:
    """(name, width, offset-for-1-based) triples in wire order."""
    if mtype == MsgType.ELECT_NOTIFY:
        return ()
    if mtype in (MsgType.STATUS_REPORT, MsgType.COMMITTEE_RESPONSE):
        return (
            ("id", w.id_w, 1),
            ("lo", w.slot_w, 1),
            ("hi", w.slot_w, 1),
            ("d", w.depth_w, 0),
            ("p", w.depth_w, 0),
        )
    if mtype in (MsgType.ELECT, MsgType.ID_ANNOUNCE):
        return (("id", w.id_w, 1),)
    if mtype in (MsgType.VAL_INIT, MsgType.VAL_ECHO):
        return (("value", w.value_w, 0),)
    if mtype in (MsgType.DIFF_REPORT, MsgType.CONS_VOTE, MsgType.CONS_LEADER):
        return (("bit", 1, 0),)
    if mtype == MsgType.NEW:
        return (("has_value", 1, 0), ("nid", w.slot_w, 1))
    raise EncodeError(f"unknown message type {mtype}")


def size_bits(mtype: MsgType, w: WidthTable) -> int:
    return TAG_WIDTH + sum(width for _, width, _ in _field_layout(mtype, w))


def new_payload_fields(payload) -> tuple[int, int]:
    # None encodes as (0, slot 1); a grant as (1, nid)
    if payload is None:
        return (0, 1)
    return (1, payload)


def encode(mtype: MsgType, payload, w: WidthTable) -> tuple[int, int]:
    """Pack a payload into (bits-as-int, bit-length)."""
    layout = _field_layout(mtype, w)
    if mtype == MsgType.NEW:
        values = new_payload_fields(payload)
    elif not layout:
        values = ()
    elif len(layout) == 1:
        values = (payload,)
    else:
        values = tuple(payload)
    if len(values) != len(layout):
        raise EncodeError(f"{mtype.name}: expected {len(layout)} fields, got {len(values)}")
    acc = int(mtype)
    nbits = TAG_WIDTH
    for (name, width, off), value in zip(layout, values):
        stored = value - off
        if stored < 0 or stored >> width:
            raise EncodeError(f"{mtype.name}.{name}={value} does not fit {width} bits")
        acc = (acc << width) | stored
        nbits += width
    return acc, nbits


def decode(encoded: int, nbits: int, w: WidthTable):
    """Inverse of encode: returns (mtype, payload)."""
    if encoded < 0 or (nbits and encoded >> nbits):
        raise EncodeError("encoded value exceeds declared bit length")
    tag = encoded >> (nbits - TAG_WIDTH)
    mtype = MsgType(tag)
    layout = _field_layout(mtype, w)
    if nbits != size_bits(mtype, w):
        raise EncodeError(f"{mtype.name}: expected {size_bits(mtype, w)} bits, got {nbits}")
    rest = encoded & ((1 << (nbits - TAG_WIDTH)) - 1) if nbits > TAG_WIDTH else 0
    values = []
    consumed = nbits - TAG_WIDTH
    for name, width, off in layout:
        consumed -= width
        values.append(((rest >> consumed) & ((1 << width) - 1)) + off)
    if mtype == MsgType.NEW:
        has_value, nid = values
        return mtype, (nid if has_value else None)
    if not layout:
        return mtype, None
    if len(layout) == 1:
        return mtype, values[0]
    return mtype, tuple(values)


def check_budget(mtype: MsgType, w: WidthTable) -> None:
    # at tiny namespaces the constant tag dominates ceil(log2 N)
    limit = BIT_BUDGET[mtype] * max(w.id_w, TAG_WIDTH)
    got = size_bits(mtype, w)
    if got > limit:
        raise EncodeError(f"{mtype.name}: {got} bits exceeds budget {limit}")
