"""Deterministic synchronous-round message engine.

Each round has three steps: live nodes submit fan-out sends, the crash
adversary (if any) commits crash decisions after seeing the submitted
envelopes, and the engine delivers. A node crashed in round r delivers
an adversary-chosen subset of its round-r envelopes and neither sends
nor receives afterwards. Sender identity is stamped by the engine, so
spoofing is impossible by construction.

Delivery is aggregated: envelopes with a shared receiver set form one
part whose item groups collapse identical payloads, so a broadcast from
k senders to m receivers costs O(k + m) work instead of O(k*m) while
message and bit counters still reflect every individual envelope.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .bitcodec import MsgType, WidthTable, size_bits
from .errors import ConfigError

LOG_OFF = "off"
LOG_SUMMARY = "summary"
LOG_TRACE = "trace"


@dataclass
class SendSpec:
    """One fan-out submission: the same logical message to many receivers.

    mapped=True means payload is a dict keyed by receiver and each
    receiver sees only its own entry (used for per-report responses).
    """

    receivers: tuple
    mtype: MsgType
    payload: object
    mapped: bool = False


@dataclass(frozen=True)
class ItemGroup:
    mtype: MsgType
    payload: object
    senders: tuple
    mapped: bool = False


class Part:
    """Items delivered to every receiver in one shared receiver set."""

    __slots__ = ("receivers", "groups")

    def __init__(self, receivers, groups):
        self.receivers = receivers
        self.groups = groups


class Inbox:
    """A receiver's view of one round: shared parts plus its own id."""

    __slots__ = ("parts", "me", "_key")

    def __init__(self, parts, me):
        self.parts = parts
        self.me = me
        self._key = None

    @property
    def key(self):
        if self._key is None:
            self._key = tuple(id(p) for p in self.parts)
        return self._key

    def groups(self):
        """Yields (mtype, payload-for-me, senders) per item group."""
        me = self.me
        for part in self.parts:
            for g in part.groups:
                if g.mapped:
                    entry = g.payload.get(me)
                    if entry is not None:
                        yield g.mtype, entry, g.senders
                else:
                    yield g.mtype, g.payload, g.senders

    def items(self):
        """Flat (sender, mtype, payload) triples, sender-deduplicated later
        by consumers that need it."""
        for mtype, payload, senders in self.groups():
            for s in senders:
                yield s, mtype, payload

    def empty(self) -> bool:
        for _ in self.groups():
            return False
        return True


@dataclass
class MetricCounters:
    rounds_total: int = 0
    messages_total: int = 0
    bits_total: int = 0
    byz_messages_total: int = 0
    byz_bits_total: int = 0
    messages_per_round: list = field(default_factory=list)
    bits_per_round: list = field(default_factory=list)
    committee_size_history: list = field(default_factory=list)
    stage_messages: dict = field(default_factory=dict)

    def add_stage(self, stage: str, count: int) -> None:
        self.stage_messages[stage] = self.stage_messages.get(stage, 0) + count


@dataclass
class Transcript:
    protocol: str
    n: int
    N: int
    seed: int
    metrics: MetricCounters
    events: list = field(default_factory=list)
    outcome: dict = field(default_factory=dict)
    success: bool = False
    failure_cause: str | None = None
    monitor_failures: list = field(default_factory=list)
    f_actual: int = 0
    extra: dict = field(default_factory=dict)

    def digest(self) -> str:
        body = {
            "protocol": self.protocol,
            "n": self.n,
            "N": self.N,
            "seed": self.seed,
            "rounds": self.metrics.rounds_total,
            "messages": self.metrics.messages_total,
            "bits": self.metrics.bits_total,
            "messages_per_round": self.metrics.messages_per_round,
            "outcome": {str(k): v for k, v in sorted(self.outcome.items())},
            "success": self.success,
            "failure_cause": self.failure_cause,
            "monitor_failures": self.monitor_failures,
            "f_actual": self.f_actual,
        }
        enc = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(enc.encode()).hexdigest()

    def to_json(self) -> str:
        body = {
            "protocol": self.protocol,
            "n": self.n,
            "N": self.N,
            "seed": self.seed,
            "success": self.success,
            "failure_cause": self.failure_cause,
            "f_actual": self.f_actual,
            "outcome": {str(k): v for k, v in sorted(self.outcome.items())},
            "monitor_failures": self.monitor_failures,
            "metrics": {
                "rounds_total": self.metrics.rounds_total,
                "messages_total": self.metrics.messages_total,
                "bits_total": self.metrics.bits_total,
                "byz_messages_total": self.metrics.byz_messages_total,
                "byz_bits_total": self.metrics.byz_bits_total,
                "messages_per_round": self.metrics.messages_per_round,
                "bits_per_round": self.metrics.bits_per_round,
                "committee_size_history": self.metrics.committee_size_history,
                "stage_messages": self.metrics.stage_messages,
            },
            "extra": self.extra,
            "events": self.events,
            "digest": self.digest(),
        }
        return json.dumps(body, sort_keys=True, indent=1)


@dataclass
class CrashDecision:
    """Adversary output for one round: victim -> delivered receiver tuple."""

    delivered: dict


class RoundView:
    """What a crash adversary may observe before committing decisions."""

    __slots__ = ("round_index", "phase", "subround", "live", "pending", "budget_left")

    def __init__(self, round_index, phase, subround, live, pending, budget_left):
        self.round_index = round_index
        self.phase = phase
        self.subround = subround
        self.live = live
        self.pending = pending  # list of (sender, mtype, receiver_count, receivers)
        self.budget_left = budget_left


class Engine:
    """Round executor shared by both protocol drivers."""

    def __init__(self, n: int, N: int, widths: WidthTable, log_level: str = LOG_OFF,
                 count_delivered_only: bool = False, byz_ids: frozenset = frozenset()):
        if n < 2 or N < n:
            raise ConfigError(f"engine needs 2 <= n <= N, got n={n}, N={N}")
        self.n = n
        self.N = N
        self.widths = widths
        self.log_level = log_level
        self.count_delivered_only = count_delivered_only
        self.byz_ids = byz_ids
        self._bits_cache: dict = {}
        self.metrics = MetricCounters()
        self.events: list = []
        self.round_index = 0
        self.crashed: set = set()
        self.crashed_this_trial: list = []

    # ---- helpers -------------------------------------------------------

    def _bits_of(self, mtype: MsgType) -> int:
        got = self._bits_cache.get(mtype)
        if got is None:
            got = self._bits_cache[mtype] = size_bits(mtype, self.widths)
        return got

    def _record_send(self, sender: int, spec: SendSpec, delivered_count: int,
                     sent_count: int, msg_acc: list) -> None:
        counted = delivered_count if self.count_delivered_only else sent_count
        bits = counted * self._bits_of(spec.mtype)
        if sender in self.byz_ids:
            self.metrics.byz_messages_total += counted
            self.metrics.byz_bits_total += bits
        else:
            msg_acc[0] += counted
            msg_acc[1] += bits

    # ---- round execution ----------------------------------------------

    def run_round(self, senders: dict, receivers: dict, adversary=None,
                  phase: int = 0, subround: int = 0, budget_left: int = 0,
                  stage: str | None = None) -> CrashDecision | None:
        """One synchronous round.

        senders: node_id -> callable(round) -> list[SendSpec]
        receivers: node_id -> callable(round, Inbox)
        """
        rnd = self.round_index
        submissions: list[tuple[int, SendSpec]] = []
        for node_id in sorted(senders):
            if node_id in self.crashed:
                continue
            for spec in senders[node_id](rnd):
                submissions.append((node_id, spec))

        decision = None
        if adversary is not None:
            pending = [
                (s, spec.mtype, len(spec.receivers), spec.receivers)
                for s, spec in submissions
            ]
            view = RoundView(rnd, phase, subround,
                             tuple(sorted(set(senders) - self.crashed)),
                             pending, budget_left)
            decision = adversary.decide(view)
            if decision is not None:
                for victim in decision.delivered:
                    if victim in self.crashed:
                        raise ConfigError(f"adversary crashed dead node {victim}")
                if len(decision.delivered) > budget_left:
                    raise ConfigError("adversary exceeded crash budget")
                for victim in sorted(decision.delivered):
                    self.crashed.add(victim)
                    self.crashed_this_trial.append((rnd, victim))
                    if self.log_level != LOG_OFF:
                        self.events.append(("crash", rnd, victim))

        # deliver: group by receiver tuple identity, collapse equal payloads
        parts_by_recv: dict = {}
        msg_acc = [0, 0]
        for sender, spec in submissions:
            recv = spec.receivers
            if decision is not None and sender in decision.delivered:
                allowed = decision.delivered[sender]
                recv = tuple(r for r in recv if r in allowed)
            self._record_send(sender, spec, len(recv), len(spec.receivers), msg_acc)
            if self.log_level == LOG_TRACE:
                self.events.append(
                    ("send", rnd, sender, spec.mtype.name, len(spec.receivers), len(recv)))
            if not recv:
                continue
            bucket = parts_by_recv.setdefault(id(recv), (recv, {}))
            group_key = (spec.mtype, spec.payload if not spec.mapped else id(spec.payload))
            bucket[1].setdefault(group_key, (spec.mtype, spec.payload, spec.mapped, []))[3].append(sender)

        parts = []
        for recv, groupmap in parts_by_recv.values():
            groups = tuple(
                ItemGroup(mtype, payload, tuple(snds), mapped)
                for (mtype, payload, mapped, snds) in groupmap.values()
            )
            parts.append(Part(recv, groups))

        inbox_parts: dict[int, list] = {}
        for part in parts:
            for r in part.receivers:
                if r in self.crashed:
                    continue
                inbox_parts.setdefault(r, []).append(part)

        self.metrics.messages_total += msg_acc[0]
        self.metrics.bits_total += msg_acc[1]
        self.metrics.messages_per_round.append(msg_acc[0])
        self.metrics.bits_per_round.append(msg_acc[1])
        if stage is not None:
            self.metrics.add_stage(stage, msg_acc[0])

        for node_id in sorted(receivers):
            if node_id in self.crashed:
                continue
            receivers[node_id](rnd, Inbox(tuple(inbox_parts.get(node_id, ())), node_id))

        self.round_index += 1
        self.metrics.rounds_total = self.round_index
        return decision

    def fast_forward(self, rounds: int, messages_per_round: int, bits_per_round: int,
                     stage: str | None = None) -> None:
        """Advance the clock over rounds whose outcome is already forced.

        The per-round counters reflect what the skipped rounds would have
        sent; correctness of the skip is the caller's obligation.
        """
        for _ in range(rounds):
            self.metrics.messages_total += messages_per_round
            self.metrics.bits_total += bits_per_round
            self.metrics.messages_per_round.append(messages_per_round)
            self.metrics.bits_per_round.append(bits_per_round)
            self.round_index += 1
        if stage is not None and rounds:
            self.metrics.add_stage(stage, messages_per_round * rounds)
        self.metrics.rounds_total = self.round_index
