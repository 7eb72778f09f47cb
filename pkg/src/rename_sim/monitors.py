"""Runtime monitors for the correctness lemmas each protocol relies on.

Every monitor checks one deterministic claim during a trial and raises
MonitorViolation when it fails, naming the claim. The manifest below is
the single source of truth for which claims are covered; a startup check
in the test suite compares it against the registry so a silently dropped
monitor cannot pass unnoticed.

Probabilistic claims (committee sizes hitting their expected range) are
not trial-aborting: they are tallied across seeds by the harness and
asserted statistically in the acceptance tests.
"""

from __future__ import annotations

import math
from collections import Counter

from .bitcodec import ceil_log2
from .errors import MonitorViolation
from .intervals import contains, size

LEMMA_MANIFEST = {
    "crash": (
        "interval-capacity",
        "depth-progress",
        "rebuild-bumps-exponent",
        "exponent-gap",
        "monotonic-progress",
        "termination",
        "unique-names",
        "name-range",
        "message-cap",
    ),
    "byz": (
        "view-containment",
        "segment-lockstep",
        "iteration-bound",
        "segment-partition",
        "clean-majority",
        "count-consensus",
        "order-preserving",
        "unique-names",
        "name-range",
    ),
}

MONITOR_REGISTRY = {
    "interval-capacity": "no interval ever holds more live nodes than slots",
    "depth-progress": "a surviving committee pushes the shallowest undecided node down",
    "rebuild-bumps-exponent": "a phase with no live committee raises every exponent by one",
    "exponent-gap": "live rebuild exponents never differ by more than one",
    "monotonic-progress": "intervals only shrink, depth and exponent only grow",
    "termination": "every live node decides by the horizon",
    "unique-names": "no two live nodes decide the same name",
    "name-range": "every decided name lies in [1, n]",
    "message-cap": "total protocol messages stay under the n^2 log n cap",
    "view-containment": "every correct node's committee view contains all correct members",
    "segment-lockstep": "correct members process identical segment stacks each iteration",
    "iteration-bound": "the divide loop ends within 4*max(f,1)*log2(N) iterations",
    "segment-partition": "processed segments tile the namespace exactly",
    "clean-majority": "a majority of correct members agree bitwise on each settled segment",
    "count-consensus": "agreed one-counts never exceed the true occupancy",
    "order-preserving": "granted names respect identity order among clean nodes",
}

# snapshot rows: (id, alive, elected, interval, d, p)


def _capacity_check(snapshot, where):
    cnt = Counter(row[3] for row in snapshot if row[1])
    if len(cnt) > 16:
        # vectorized containment sums; the quadratic scan gets slow once
        # crashes scatter nodes over many distinct intervals
        import numpy as np

        los = np.array([iv[0] for iv in cnt])
        his = np.array([iv[1] for iv in cnt])
        cs = np.array(list(cnt.values()))
        for i, iv in enumerate(cnt):
            total = int(cs[(los >= los[i]) & (his <= his[i])].sum())
            if total > size(iv):
                raise MonitorViolation(
                    "interval-capacity",
                    f"{where}: {total} live nodes inside {iv} of size {size(iv)}")
        return
    for iv in cnt:
        total = sum(c for jv, c in cnt.items() if contains(iv, jv))
        if total > size(iv):
            raise MonitorViolation(
                "interval-capacity",
                f"{where}: {total} live nodes inside {iv} of size {size(iv)}")


class CrashMonitor:
    """Tracks one crash-protocol trial across phase boundaries."""

    def __init__(self, n: int):
        self.n = n
        self.horizon_depth = ceil_log2(n)
        self.prev: dict | None = None
        self.prev_min_undecided: float | None = None
        self.prev_any_elected: bool | None = None

    def _store(self, snapshot):
        self.prev = {row[0]: row for row in snapshot}
        live_undec = [row[4] for row in snapshot
                      if row[1] and row[3][0] != row[3][1]]
        self.prev_min_undecided = min(live_undec) if live_undec else None
        self.prev_any_elected = any(row[1] and row[2] for row in snapshot)

    def on_init(self, snapshot):
        _capacity_check(snapshot, "init")
        self._store(snapshot)

    def on_phase_end(self, phase, snapshot, committee_survived: bool):
        where = f"phase {phase}"
        _capacity_check(snapshot, where)
        assert self.prev is not None
        for row in snapshot:
            nid, alive, _, iv, d, p = row
            if not alive:
                continue
            _, _, _, piv, pd, pp = self.prev[nid]
            if not contains(piv, iv) or d < pd or p < pp:
                raise MonitorViolation(
                    "monotonic-progress",
                    f"{where}: node {nid} went {piv},d{pd},p{pp} -> {iv},d{d},p{p}")
            if d > self.horizon_depth:
                raise MonitorViolation(
                    "monotonic-progress",
                    f"{where}: node {nid} reached depth {d} past {self.horizon_depth}")

        if committee_survived and self.prev_min_undecided is not None:
            live_undec = [row[4] for row in snapshot
                          if row[1] and row[3][0] != row[3][1]]
            if live_undec and min(live_undec) < self.prev_min_undecided + 1:
                raise MonitorViolation(
                    "depth-progress",
                    f"{where}: min undecided depth stayed at {min(live_undec)} "
                    f"(was {self.prev_min_undecided}) despite a surviving committee")

        if self.prev_any_elected is False:
            for row in snapshot:
                if row[1] and row[5] != self.prev[row[0]][5] + 1:
                    raise MonitorViolation(
                        "rebuild-bumps-exponent",
                        f"{where}: node {row[0]} exponent {self.prev[row[0]][5]} -> "
                        f"{row[5]} after a committee-free phase")

        live_p = [row[5] for row in snapshot if row[1]]
        if live_p and max(live_p) - min(live_p) > 1:
            raise MonitorViolation(
                "exponent-gap",
                f"{where}: exponent spread {min(live_p)}..{max(live_p)}")

        self._store(snapshot)

    def on_final(self, snapshot, messages_total: int, message_cap: float):
        names = []
        for nid, alive, _, iv, _, _ in snapshot:
            if not alive:
                continue
            if iv[0] != iv[1]:
                raise MonitorViolation(
                    "termination", f"node {nid} still holds {iv} at the horizon")
            names.append(iv[0])
        dup = [x for x, c in Counter(names).items() if c > 1]
        if dup:
            raise MonitorViolation("unique-names", f"duplicated names {sorted(dup)}")
        bad = [x for x in names if not 1 <= x <= self.n]
        if bad:
            raise MonitorViolation("name-range", f"names out of range {sorted(bad)}")
        if messages_total > message_cap:
            raise MonitorViolation(
                "message-cap",
                f"{messages_total} messages exceed cap {message_cap:.0f}")


class ByzMonitor:
    """Tracks one Byzantine-renaming trial.

    The driver feeds it ground truth it could not otherwise see (true
    ids per segment, per-member agreement values), so every check here
    is a deterministic lemma, not a sampled estimate.
    """

    def __init__(self, n: int, N: int, f_actual: int, c_g: float,
                 correct_ids, corrupt_ids):
        self.n = n
        self.N = N
        self.f_actual = f_actual
        self.c_g = c_g
        self.correct = frozenset(correct_ids)
        self.corrupt = frozenset(corrupt_ids)
        self.iteration_cap = 4.0 * max(f_actual, 1) * math.log2(N)
        self.iterations = 0

    def on_views(self, views: dict, correct_winners, corrupt_winners) -> None:
        required = frozenset(correct_winners)
        allowed = required | frozenset(corrupt_winners)
        for u, view in views.items():
            if u not in self.correct:
                continue
            if not required <= view:
                missing = sorted(required - view)
                raise MonitorViolation(
                    "view-containment",
                    f"node {u} misses correct members {missing}")
            if not view <= allowed:
                extra = sorted(view - allowed)
                raise MonitorViolation(
                    "view-containment",
                    f"node {u} admitted non-winners {extra}")

    def on_consensus(self, label: str, outputs: dict):
        values = set(outputs.values())
        if len(values) != 1:
            raise MonitorViolation(
                "segment-lockstep",
                f"consensus {label} split the committee: {sorted(values)}")
        return values.pop()

    def on_iteration(self) -> None:
        self.iterations += 1
        if self.iterations > self.iteration_cap:
            raise MonitorViolation(
                "iteration-bound",
                f"{self.iterations} iterations exceed "
                f"4*max(f,1)*log2(N) = {self.iteration_cap:.1f}")

    def on_settle(self, segment, agreed_count: int, correct_inside: int,
                  total_inside: int, clean_correct: int) -> None:
        if not correct_inside <= agreed_count <= total_inside:
            raise MonitorViolation(
                "count-consensus",
                f"segment {segment} agreed on {agreed_count} occupants, "
                f"truth is [{correct_inside}, {total_inside}]")
        if clean_correct <= self.c_g / 2.0:
            raise MonitorViolation(
                "clean-majority",
                f"segment {segment} settled with only {clean_correct} clean "
                f"members, need more than {self.c_g / 2.0:.1f}")

    def on_final(self, settled, names: dict) -> None:
        cursor = 1
        for lo, hi in sorted(settled):
            if lo != cursor or hi < lo:
                raise MonitorViolation(
                    "segment-partition",
                    f"settled segments leave a hole or overlap at {cursor}: "
                    f"({lo}, {hi})")
            cursor = hi + 1
        if cursor != self.N + 1:
            raise MonitorViolation(
                "segment-partition",
                f"settled segments stop at {cursor - 1}, namespace ends at {self.N}")
        if self.f_actual == 0 and self.iterations != 1:
            raise MonitorViolation(
                "iteration-bound",
                f"{self.iterations} iterations without faults, expected exactly 1")

        granted = {u: name for u, name in names.items() if u in self.correct}
        dup = [x for x, c in Counter(granted.values()).items() if c > 1]
        if dup:
            raise MonitorViolation("unique-names", f"duplicated names {sorted(dup)}")
        bad = [x for x in granted.values() if not 1 <= x <= self.n]
        if bad:
            raise MonitorViolation("name-range", f"names out of range {sorted(bad)}")
        ordered = [name for _, name in sorted(granted.items())]
        if any(b <= a for a, b in zip(ordered, ordered[1:])):
            raise MonitorViolation(
                "order-preserving",
                f"names do not increase with ids: {ordered}")
