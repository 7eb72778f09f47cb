"""Crash-resilient strong renaming by repeated interval halving.

Every node starts with the full slot interval [1, n] at depth 0. In each
phase a self-elected committee collects status reports and tells each
reporter which half of its interval to keep, splitting reporters between
halves by rank so that no half ever holds more nodes than slots. A node
that gets no response increments a rebuild exponent p and re-elects
itself with probability growing as 2**p, so crashed committees are
replaced within a phase. After 3*ceil(log2 n) phases every live node
holds a singleton interval, which is its new name.

A phase has three sub-rounds: committee members announce themselves,
nodes report (id, interval, depth, exponent) to every announcer they
heard, and members respond per report. The init round (round 0) carries
no messages; it only runs the initial election and gives the adversary
its first crash opportunity.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bitcodec import MsgType, WidthTable, ceil_log2
from .engine import Engine, SendSpec
from .errors import ConfigError
from .intervals import bot, rank, size, top
from .randomness import derive_int, private_stream

import random

DEFAULT_ELECTION_COEFF = 256.0

_CRASH_OVERRIDE_KEYS = {
    "election_coeff",
    "clamp",
    "count_delivered_only",
    "message_cap_coeff",
}


def election_prob(p: int, n: int, coeff: float, clamp: bool = True) -> float:
    """Committee self-election probability at rebuild exponent p."""
    import math

    raw = coeff * (2.0 ** p) * math.log2(n) / n
    if raw > 1.0 and not clamp:
        raise ConfigError(
            f"election probability {raw:.3f} needs clamping at n={n}, p={p}")
    return min(1.0, raw)


@dataclass
class NodeState:
    nid: int
    interval: tuple
    d: int = 0
    p: int = 0
    elected: bool = False

    @property
    def decided(self) -> bool:
        return self.interval[0] == self.interval[1]


def committee_action(reports, p_out: int, rank_fn=rank):
    """Map each report to its response.

    reports: iterable of (id, lo, hi, d, p). Reports at the minimum depth
    with room to halve are split between the two halves of their interval:
    the bottom half takes reporters whose rank among same-interval ids
    still fits after counting everyone already inside that half, the rest
    go top. Deeper or singleton reports are echoed unchanged so their
    senders learn the committee is alive.
    """
    reports = list(reports)
    d_min = min(r[3] for r in reports)
    by_interval: dict = {}
    for r in reports:
        by_interval.setdefault((r[1], r[2]), []).append(r[0])

    def below_count(iv):
        return sum(
            len(ids) for (lo, hi), ids in by_interval.items()
            if iv[0] <= lo and hi <= iv[1]
        )

    # ranks and occupancy depend only on the interval, not the reporter
    occupancy: dict = {}
    ranks_of: dict = {}
    responses = {}
    for rid, lo, hi, d, p in reports:
        iv = (lo, hi)
        if d == d_min and lo != hi:
            ranks = ranks_of.get(iv)
            if ranks is None:
                ids = by_interval[iv]
                if rank_fn is rank:
                    ranks = {x: i + 1 for i, x in enumerate(sorted(ids))}
                else:
                    ranks = {x: rank_fn(x, ids) for x in ids}
                ranks_of[iv] = ranks
            b = bot(iv)
            occupants = occupancy.get(b)
            if occupants is None:
                occupants = occupancy[b] = below_count(b)
            if occupants + ranks[rid] <= size(b):
                half = b
            else:
                half = top(iv)
            responses[rid] = (rid, half[0], half[1], d + 1, p_out)
        else:
            responses[rid] = (rid, lo, hi, d, p_out)
    return responses


def node_action(state: NodeState, candidates, p_seen: int, n: int,
                coeff: float, clamp: bool, rng: random.Random) -> None:
    """Apply one phase's responses (or their absence) to a node.

    candidates: list of (lo, hi, d) taken from responses addressed to this
    node; p_seen: highest exponent any response carried, or -1 when the
    node heard nothing and must rebuild.
    """
    if not candidates:
        state.p += 1
        if not state.elected:
            prob = election_prob(state.p, n, coeff, clamp)
            if rng.random() < prob:
                state.elected = True
        return
    best = min(candidates, key=lambda c: (-c[2], c[0], c[1]))
    state.interval = (best[0], best[1])
    state.d = best[2]
    if p_seen > state.p:
        state.p = p_seen
        if not state.elected:
            prob = election_prob(state.p, n, coeff, clamp)
            if rng.random() < prob:
                state.elected = True


class _TrialRun:
    """Mutable bookkeeping for one trial; drives the engine callbacks."""

    def __init__(self, n, N, seed, overrides, log_level, monitor=None,
                 adversary=None, budget: int = 0):
        overrides = dict(overrides or {})
        unknown = set(overrides) - _CRASH_OVERRIDE_KEYS
        if unknown:
            raise ConfigError(f"unknown crash overrides: {sorted(unknown)}")
        self.n = n
        self.N = N
        self.seed = seed
        self.coeff = float(overrides.get("election_coeff", DEFAULT_ELECTION_COEFF))
        self.clamp = bool(overrides.get("clamp", True))
        self.message_cap_coeff = float(overrides.get("message_cap_coeff", 16.0))
        self.widths = WidthTable.for_namespace(n, N)
        self.engine = Engine(
            n, N, self.widths, log_level=log_level,
            count_delivered_only=bool(overrides.get("count_delivered_only", False)),
        )
        self.monitor = monitor
        self.adversary = adversary
        self.budget = budget

        id_rng = random.Random(derive_int(seed, "crash-ids"))
        self.ids = sorted(id_rng.sample(range(1, N + 1), n))
        self.all_ids = tuple(self.ids)
        self.states = {i: NodeState(nid=i, interval=(1, n)) for i in self.ids}
        self.rngs = {i: private_stream(seed, i) for i in self.ids}

        prob0 = election_prob(0, n, self.coeff, self.clamp)
        for i in self.ids:
            if self.rngs[i].random() < prob0:
                self.states[i].elected = True

        # per-phase scratch
        self.heard: dict = {}
        self.member_inbox: dict = {}
        self.announcers: set = set()
        self._heard_cache: dict = {}
        self._action_cache: dict = {}

    # -- engine callbacks, one pair per sub-round -------------------------

    def _sr1_send(self, v):
        def f(rnd):
            if self.states[v].elected:
                self.announcers.add(v)
                return [SendSpec(self.all_ids, MsgType.ELECT_NOTIFY, None)]
            return []
        return f

    def _sr1_recv(self, v):
        def f(rnd, inbox):
            key = inbox.key
            heard = self._heard_cache.get(key)
            if heard is None:
                snds: list = []
                for _, _, senders in inbox.groups():
                    snds.extend(senders)
                heard = tuple(sorted(snds))
                self._heard_cache[key] = heard
            self.heard[v] = heard
        return f

    def _sr2_send(self, v):
        def f(rnd):
            heard = self.heard.get(v, ())
            if not heard:
                return []
            s = self.states[v]
            payload = (v, s.interval[0], s.interval[1], s.d, s.p)
            return [SendSpec(heard, MsgType.STATUS_REPORT, payload)]
        return f

    def _sr2_recv(self, v):
        def f(rnd, inbox):
            if v in self.announcers:
                self.member_inbox[v] = inbox
        return f

    def _sr3_send(self, v):
        def f(rnd):
            inbox = self.member_inbox.get(v)
            if inbox is None:
                return []
            cached = self._action_cache.get(inbox.key)
            if cached is None:
                reports = []
                seen = set()
                for sender, _, payload in inbox.items():
                    if sender not in seen:
                        seen.add(sender)
                        reports.append(payload)
                if not reports:
                    cached = (None, None)
                else:
                    p_out = max(r[4] for r in reports)
                    resp = committee_action(reports, p_out)
                    cached = (resp, tuple(sorted(resp)))
                self._action_cache[inbox.key] = cached
            resp, receivers = cached
            if resp is None:
                return []
            return [SendSpec(receivers, MsgType.COMMITTEE_RESPONSE, resp, mapped=True)]
        return f

    def _sr3_recv(self, v):
        def f(rnd, inbox):
            candidates = []
            p_seen = -1
            for _, entry, _ in inbox.groups():
                candidates.append((entry[1], entry[2], entry[3]))
                if entry[4] > p_seen:
                    p_seen = entry[4]
            node_action(self.states[v], candidates, p_seen, self.n,
                        self.coeff, self.clamp, self.rngs[v])
        return f

    # -- phase loop --------------------------------------------------------

    def live_ids(self):
        return [i for i in self.ids if i not in self.engine.crashed]

    def _budget_left(self):
        return self.budget - len(self.engine.crashed_this_trial)

    def run(self):
        eng = self.engine
        noop_send = {v: (lambda rnd: []) for v in self.ids}
        noop_recv = {v: (lambda rnd, inbox: None) for v in self.ids}
        eng.run_round(noop_send, noop_recv, adversary=self.adversary,
                      phase=-1, subround=0, budget_left=self._budget_left(),
                      stage="init")
        if self.monitor:
            self.monitor.on_init(self.snapshot())

        phases = 3 * ceil_log2(self.n)
        for phase in range(phases):
            self.heard.clear()
            self.member_inbox.clear()
            self.announcers.clear()
            self._heard_cache.clear()
            self._action_cache.clear()

            eng.run_round({v: self._sr1_send(v) for v in self.ids},
                          {v: self._sr1_recv(v) for v in self.ids},
                          adversary=self.adversary, phase=phase, subround=1,
                          budget_left=self._budget_left(), stage="sr1")
            eng.run_round({v: self._sr2_send(v) for v in self.ids},
                          {v: self._sr2_recv(v) for v in self.ids},
                          adversary=self.adversary, phase=phase, subround=2,
                          budget_left=self._budget_left(), stage="sr2")
            eng.run_round({v: self._sr3_send(v) for v in self.ids},
                          {v: self._sr3_recv(v) for v in self.ids},
                          adversary=self.adversary, phase=phase, subround=3,
                          budget_left=self._budget_left(), stage="sr3")
            if self.monitor:
                survivors = self.announcers - eng.crashed
                self.monitor.on_phase_end(phase, self.snapshot(),
                                          committee_survived=bool(survivors))
        if self.monitor:
            cap = self.message_cap_coeff * self.n * self.n * max(1, ceil_log2(self.n))
            self.monitor.on_final(self.snapshot(), eng.metrics.messages_total, cap)

    def snapshot(self):
        crashed = self.engine.crashed
        return [
            (i, i not in crashed, s.elected, s.interval, s.d, s.p)
            for i, s in self.states.items()
        ]


def run_crash_trial(n: int, N: int, seed: int, adversary: dict | None = None,
                    overrides: dict | None = None, log_level: str = "off"):
    """Run one crash-protocol trial and return its Transcript.

    adversary: {"name": str, "budget_f": int, "params": {...}} or None.
    Deterministic monitor violations are caught and recorded; they mark
    the trial failed rather than crashing the caller.
    """
    from .adversaries import make_crash_adversary
    from .engine import Transcript
    from .errors import MonitorViolation
    from .monitors import CrashMonitor

    phases = 3 * ceil_log2(n)
    total_rounds = 1 + 3 * phases
    budget = 0
    adv = None
    if adversary is not None:
        budget = int(adversary.get("budget_f", 0))
        if not 0 <= budget < n:
            raise ConfigError(f"crash budget {budget} outside [0, n)")
        adv = make_crash_adversary(adversary["name"], budget, seed,
                                   total_rounds, phases)

    monitor = CrashMonitor(n)
    trial = _TrialRun(n, N, seed, overrides, log_level,
                      monitor=monitor, adversary=adv, budget=budget)
    failure = None
    violations = []
    try:
        trial.run()
    except MonitorViolation as mv:
        failure = f"monitor:{mv.monitor}"
        violations.append(mv.monitor)

    eng = trial.engine
    outcome = {}
    for i, s in trial.states.items():
        if i in eng.crashed:
            outcome[i] = "crashed"
        else:
            outcome[i] = s.interval[0] if s.decided else None
    t = Transcript(
        protocol="crash", n=n, N=N, seed=seed, metrics=eng.metrics,
        events=eng.events, outcome=outcome,
        success=failure is None, failure_cause=failure,
        monitor_failures=violations,
        f_actual=len(eng.crashed_this_trial),
    )
    t.extra["phases"] = phases
    t.extra["crash_rounds"] = [r for r, _ in eng.crashed_this_trial]
    return t
