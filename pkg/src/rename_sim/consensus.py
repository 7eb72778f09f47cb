"""Committee consensus via graded three-round leader phases.

Each phase runs vote, propose, leader. A member locks a value backed by
at least c_g proposals; lacking a lock it adopts its leader's value,
falling back to any value backed by more than c_g/2 proposals. Two
facts carry the contract, assuming at least c_g correct members and
fewer than c_g/2 corrupt ones:

* Persistence: with unanimous correct input b, every correct member
  tallies at least c_g votes for b, proposes b, and locks b. Corrupt
  members muster fewer than c_g/2 proposals, never a competing lock.
* Convergence: correct members can propose at most one common value per
  phase (two distinct strong tallies would need more correct members
  than exist), so a phase whose leader is correct and first in every
  view ends with all correct members equal, after which persistence
  holds. Leaders draw fresh shared randomness each phase, so such a
  phase occurs within the phase budget except with vanishing
  probability.

Leader priority is a shared hash of (phase, id), so a member ranks the
ids in its own view without knowing anyone else's view; two members
agree on the leader whenever the globally smallest priority lands in
both views.
"""

from __future__ import annotations

from typing import Hashable, Iterable, Mapping

from .randomness import derive_int
from .validator import top_two

Value = Hashable

PHASES = 14
ROUNDS_PER_PHASE = 3


def leader_positions(master_seed: int, trial_label: str, phase: int,
                     universe: tuple[int, ...]) -> dict[int, int]:
    """Shared per-id priorities for one phase; the smallest leads."""
    return {u: derive_int(master_seed, trial_label, "leader", phase, u)
            for u in universe}


def leader_of(view: Iterable[int], pos: Mapping[int, int]) -> int | None:
    """First id of the shared order present in this member's view."""
    best = None
    for u in view:
        p = pos.get(u)
        if p is None:
            continue
        if best is None or p < best[0]:
            best = (p, u)
    return None if best is None else best[1]


def strong_value(vote_counts: Mapping[Value, int], c_g: float) -> Value | None:
    """Value this member proposes: the vote leader if it clears c_g."""
    top, cnt1, _ = top_two(vote_counts)
    if top is not None and cnt1 >= c_g:
        return top
    return None


def king_value(propose_counts: Mapping[Value, int], current: Value,
               c_g: float) -> Value:
    """What a self-believed leader broadcasts."""
    top, cnt1, _ = top_two(propose_counts)
    if top is not None and cnt1 > c_g / 2.0:
        return top
    return current


def resolve(propose_counts: Mapping[Value, int], king: Value | None,
            current: Value, c_g: float) -> Value:
    """End-of-phase update: lock beats leader beats weak majority."""
    top, cnt1, _ = top_two(propose_counts)
    if top is not None and cnt1 >= c_g:
        return top
    if king is not None:
        return king
    if top is not None and cnt1 > c_g / 2.0:
        return top
    return current


def model_phase(
    values: Mapping[int, Value],
    views: Mapping[int, frozenset[int]],
    byz_id: int | None,
    pos: Mapping[int, int],
    byz_vote: Mapping[int, Value | None],
    byz_propose: Mapping[int, Value | None],
    byz_king: Mapping[int, Value | None],
    c_g: float,
) -> dict[int, Value]:
    """One phase at message level, one corrupt member, full correct connectivity."""
    proposals: dict[int, Value | None] = {}
    for g in values:
        counts: dict[Value, int] = {}
        for h, v in values.items():
            counts[v] = counts.get(v, 0) + 1
        bv = byz_vote.get(g)
        if bv is not None:
            counts[bv] = counts.get(bv, 0) + 1
        proposals[g] = strong_value(counts, c_g)

    kings: dict[int, Value] = {}
    for g in values:
        counts = {}
        for h, p in proposals.items():
            if p is not None:
                counts[p] = counts.get(p, 0) + 1
        bp = byz_propose.get(g)
        if bp is not None:
            counts[bp] = counts.get(bp, 0) + 1
        leader = leader_of(views[g], pos)
        king: Value | None
        if leader == byz_id:
            king = byz_king.get(g)
        elif leader is not None and leader in values:
            lead_counts: dict[Value, int] = {}
            for h, p in proposals.items():
                if p is not None:
                    lead_counts[p] = lead_counts.get(p, 0) + 1
            bp_lead = byz_propose.get(leader)
            if bp_lead is not None:
                lead_counts[bp_lead] = lead_counts.get(bp_lead, 0) + 1
            king = king_value(lead_counts, values[leader], c_g)
        else:
            king = None
        kings[g] = resolve(counts, king, values[g], c_g)
    return kings
