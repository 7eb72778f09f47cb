"""Closed integer intervals and the halving tree used by the crash protocol.

Intervals are (lo, hi) pairs with 1 <= lo <= hi. Halving an interval of
size s gives a bottom half of size ceil(s/2) and a top half of size
floor(s/2); repeated halving of [1, n] generates a laminar family whose
leaves are the singletons [i, i].
"""

from __future__ import annotations

from .errors import DegenerateIntervalError, NotMemberError

Interval = tuple[int, int]


def size(iv: Interval) -> int:
    return iv[1] - iv[0] + 1


def contains(outer: Interval, inner: Interval) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def bot(iv: Interval) -> Interval:
    """Bottom half [lo, floor((lo+hi)/2)]."""
    lo, hi = iv
    if lo >= hi:
        raise DegenerateIntervalError(f"cannot halve [{lo},{hi}]")
    return (lo, (lo + hi) // 2)


def top(iv: Interval) -> Interval:
    """Top half [floor((lo+hi)/2)+1, hi]."""
    lo, hi = iv
    if lo >= hi:
        raise DegenerateIntervalError(f"cannot halve [{lo},{hi}]")
    return ((lo + hi) // 2 + 1, hi)


def rank(x: int, values) -> int:
    """1-based position of x in the ascending ordering of values."""
    if x not in values:
        raise NotMemberError(f"{x} not in candidate set")
    return 1 + sum(1 for v in values if v < x)


def tree_depth(n: int, iv: Interval) -> int:
    """Depth of iv in the halving tree rooted at [1, n], or -1 if absent."""
    cur: Interval = (1, n)
    depth = 0
    while cur != iv:
        if not contains(cur, iv) or size(cur) == 1:
            return -1
        cur = bot(cur) if contains(bot(cur), iv) else top(cur)
        depth += 1
    return depth
