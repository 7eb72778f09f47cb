"""Exhaustive verification of the crash protocol at tiny scales.

At n <= 6 the default election coefficient makes every probability one,
so every live node is a committee member in every phase and the only
nondeterminism left is the crash schedule. This module enumerates all of
them: who crashes in which sub-round and which receivers still get each
victim's envelopes, up to two sound quotients proved by the protocol
structure:

  * delivery subsets of a mid-announce crash are irrelevant, because a
    report sent to a dead member is never read;
  * delivery to nodes that are dead by the end of the round is
    irrelevant, because the engine never hands them an inbox.

Reports and responses therefore depend only on which victims reached
which still-live nodes, giving a finite branching that is searched
depth-first with memoisation on (phase, state). Every terminal state
must show unique in-range names for all live nodes; a violating
schedule is returned as a witness path. The rank mutation hook inverts
the 1-based rank into a 0-based one, a classic off-by-one that the
search must catch.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

from .bitcodec import ceil_log2
from .crash_protocol import DEFAULT_ELECTION_COEFF, NodeState, committee_action, election_prob, node_action
from .errors import BudgetExceeded, ConfigError
from .intervals import rank

MUTATIONS = {
    "rank_off_by_one": lambda x, values: rank(x, values) - 1,
}


@dataclass
class OracleReport:
    n: int
    budget: int
    phases: int
    states_visited: int
    terminal_states: int
    violation: dict | None
    mutation: str | None


def _subsets(pool, max_size):
    pool = sorted(pool)
    for k in range(min(max_size, len(pool)) + 1):
        yield from combinations(pool, k)


def _deliveries(victims, audience):
    """All ways the victims' envelopes can reach the surviving audience."""
    if not victims:
        yield {}
        return
    audience = sorted(audience)
    options = list(_subsets(audience, len(audience)))
    for combo in product(options, repeat=len(victims)):
        yield dict(zip(victims, combo))


def _violation(ivd, alive, n):
    names = []
    for nid in sorted(alive):
        lo, hi = ivd[nid - 1][:2]
        if lo != hi:
            return f"node {nid} undecided with [{lo},{hi}]"
        if not 1 <= lo <= n:
            return f"node {nid} decided out-of-range name {lo}"
        names.append(lo)
    if len(set(names)) != len(names):
        return f"duplicate names {sorted(names)}"
    return None


def _apply_phase(n, ivd, alive, c1, c2, d2, c3, d3, rank_fn):
    """One phase under a fixed crash choice; returns the new interval map."""
    live2 = sorted(alive - set(c1) - set(c2))
    live3 = set(live2) - set(c3)
    responses = {}
    by_reporters: dict = {}
    for u in live2:
        extras = tuple(sorted(c for c in c2 if u in d2[c]))
        key = extras
        if key not in by_reporters:
            reporters = list(live2) + list(extras)
            reports = [(r,) + ivd[r - 1] for r in reporters]
            p_out = max(rep[4] for rep in reports)
            by_reporters[key] = committee_action(reports, p_out, rank_fn)
        responses[u] = by_reporters[key]

    new_ivd = list(ivd)
    for v in sorted(live3):
        cands = []
        p_seen = -1
        for u in live2:
            if u not in live3 and v not in d3.get(u, ()):
                continue
            resp = responses[u].get(v)
            if resp is not None:
                cands.append((resp[1], resp[2], resp[3]))
                p_seen = max(p_seen, resp[4])
        lo, hi, d, p = ivd[v - 1]
        st = NodeState(nid=v, interval=(lo, hi), d=d, p=p, elected=True)
        node_action(st, cands, p_seen, n, DEFAULT_ELECTION_COEFF, True, None)
        new_ivd[v - 1] = (st.interval[0], st.interval[1], st.d, st.p)
    return tuple(new_ivd)


def exhaustive_check(n: int, budget: int | None = None, mutation: str | None = None,
                     state_cap: int = 2_000_000) -> OracleReport:
    """Search every crash schedule; raise nothing, report any violation."""
    if not 2 <= n <= 6:
        raise ConfigError("exhaustive oracle supports 2 <= n <= 6")
    if election_prob(0, n, DEFAULT_ELECTION_COEFF) < 1.0:
        raise ConfigError("oracle assumes saturated election probability")
    if budget is None:
        budget = n - 1
    if not 0 <= budget < n:
        raise ConfigError(f"budget {budget} outside [0, n)")
    rank_fn = rank if mutation is None else MUTATIONS[mutation]

    phases = 3 * ceil_log2(n)
    init_ivd = tuple((1, n, 0, 0) for _ in range(n))
    init = (frozenset(range(1, n + 1)), init_ivd, budget)
    seen: set = set()
    stats = {"visited": 0, "terminal": 0}

    def dfs(phase, state, path):
        if (phase, state) in seen:
            return None
        seen.add((phase, state))
        stats["visited"] += 1
        if stats["visited"] > state_cap:
            raise BudgetExceeded(
                f"oracle state cap {state_cap} hit at n={n}, budget={budget}")
        alive, ivd, b = state
        if phase == phases:
            stats["terminal"] += 1
            why = _violation(ivd, alive, n)
            if why:
                return {"reason": why, "schedule": list(path),
                        "final": {v: ivd[v - 1] for v in sorted(alive)}}
            return None

        for c1 in _subsets(alive, b):
            live1 = alive - set(c1)
            b1 = b - len(c1)
            for c2 in _subsets(live1, b1):
                live2 = live1 - set(c2)
                b2 = b1 - len(c2)
                for d2 in _deliveries(c2, live2):
                    for c3 in _subsets(live2, b2):
                        live3 = live2 - set(c3)
                        b3 = b2 - len(c3)
                        for d3 in _deliveries(c3, live3):
                            new_ivd = _apply_phase(
                                n, ivd, alive, c1, c2, d2, c3, d3, rank_fn)
                            step = (phase, c1, c2, d2, c3, d3)
                            hit = dfs(phase + 1,
                                      (frozenset(live3), new_ivd, b3),
                                      path + [step])
                            if hit:
                                return hit
        return None

    violation = dfs(0, init, [])
    return OracleReport(
        n=n, budget=budget, phases=phases,
        states_visited=stats["visited"], terminal_states=stats["terminal"],
        violation=violation, mutation=mutation,
    )


def replay_schedule(n: int, schedule, mutation: str | None = None):
    """Apply a fixed crash schedule; returns (alive set, interval map).

    schedule: per-phase (c1, c2, d2, c3, d3) tuples as produced in
    exhaustive_check witnesses. Phases beyond the schedule run crash-free.
    """
    rank_fn = rank if mutation is None else MUTATIONS[mutation]
    phases = 3 * ceil_log2(n)
    alive = frozenset(range(1, n + 1))
    ivd = tuple((1, n, 0, 0) for _ in range(n))
    sched = {step[0]: step for step in ((s if len(s) == 6 else (i,) + tuple(s))
                                        for i, s in enumerate(schedule))}
    for phase in range(phases):
        _, c1, c2, d2, c3, d3 = sched.get(phase, (phase, (), (), {}, (), {}))
        ivd = _apply_phase(n, ivd, alive, c1, c2, d2, c3, d3, rank_fn)
        alive = alive - set(c1) - set(c2) - set(c3)
    return alive, {v: ivd[v - 1] for v in sorted(alive)}
