"""Two-round weak validation for committee values.

Members broadcast their input, echo the dominant input if it clears the
strong threshold, then grade the echo tally. The grade (``same``) is 1
only when one value dominates by more than half the strong threshold,
which no minority of equivocators can fake or suppress.

The tally -> decision steps are pure functions so the same semantics
serve both the round driver and adversarial model tests.
"""

from __future__ import annotations

from typing import Hashable, Mapping

Value = Hashable


def top_two(counts: Mapping[Value, int]) -> tuple[Value | None, int, int]:
    """Most frequent value (ties to the smallest), its count, and the runner-up count."""
    if not counts:
        return None, 0, 0
    top, cnt1 = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    cnt2 = max((c for v, c in counts.items() if v != top), default=0)
    return top, cnt1, cnt2


def echo_value(init_counts: Mapping[Value, int], c_g: float) -> Value | None:
    """Value to echo after the first round, or None to stay silent."""
    top, cnt1, _ = top_two(init_counts)
    if top is not None and cnt1 >= c_g:
        return top
    return None


def finalize(echo_counts: Mapping[Value, int], own_input: Value,
             c_g: float) -> tuple[int, Value]:
    """Grade the echo tally: returns (same, out)."""
    top, cnt1, cnt2 = top_two(echo_counts)
    out = top if top is not None and cnt1 > c_g / 2.0 else own_input
    same = 1 if (cnt1 - cnt2 > c_g / 2.0 and cnt1 >= c_g) else 0
    return same, out


def run_validator_model(
    inputs: Mapping[int, Value],
    byz_init: Mapping[int, Mapping[int, Value | None]],
    byz_echo: Mapping[int, Mapping[int, Value | None]],
    c_g: float,
) -> dict[int, tuple[int, Value]]:
    """Execute both rounds at message level with per-receiver adversarial sends.

    ``inputs`` maps correct member id -> input value; the byz maps give,
    per corrupt id, the value delivered to each correct member (None for
    silence). Correct members hear every correct member plus whatever
    the corrupt ones choose to deliver to them.
    """
    echoes: dict[int, Value | None] = {}
    for g in inputs:
        counts: dict[Value, int] = {}
        for h, v in inputs.items():
            counts[v] = counts.get(v, 0) + 1
        for b, plan in byz_init.items():
            v = plan.get(g)
            if v is not None:
                counts[v] = counts.get(v, 0) + 1
        echoes[g] = echo_value(counts, c_g)

    results: dict[int, tuple[int, Value]] = {}
    for g in inputs:
        counts = {}
        for h, e in echoes.items():
            if e is not None:
                counts[e] = counts.get(e, 0) + 1
        for b, plan in byz_echo.items():
            v = plan.get(g)
            if v is not None:
                counts[v] = counts.get(v, 0) + 1
        results[g] = finalize(counts, inputs[g], c_g)
    return results
