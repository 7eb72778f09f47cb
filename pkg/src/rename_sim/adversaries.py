"""Adversary strategies.

Crash adversaries watch each round's pending envelopes and decide who
crashes mid-send and which receivers still get the victim's envelopes.
They never exceed their budget; the engine enforces this independently.

Byzantine strategies are oblivious per-round behaviours attached to a
static corrupt set chosen without lottery access: each hook returns the
corrupt nodes' sends for one round kind, with per-receiver payloads
where the attack calls for equivocation. The protocol driver invokes
hooks only for rounds it actually plays out; skipped rounds carry no
corrupt traffic, which only ever understates the adversary's own
message counters.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .bitcodec import MsgType
from .engine import CrashDecision, SendSpec
from .errors import ConfigError
from .randomness import derive_int


class NoCrashes:
    name = "none"

    def decide(self, view):
        return None


class UniformRandomCrasher:
    """Budget crashes spread over uniformly random rounds and victims.

    Each victim's pending envelopes are delivered to an independent
    coin-flip subset of their receivers.
    """

    name = "uniform_random"

    def __init__(self, budget: int, seed: int, total_rounds: int):
        self.rng = random.Random(derive_int(seed, "adversary", self.name))
        self.per_round: dict = {}
        for r in (self.rng.randrange(total_rounds) for _ in range(budget)):
            self.per_round[r] = self.per_round.get(r, 0) + 1

    def decide(self, view):
        k = min(self.per_round.get(view.round_index, 0), view.budget_left,
                len(view.live))
        if k <= 0:
            return None
        victims = self.rng.sample(view.live, k)
        pending = {}
        for sender, _, _, receivers in view.pending:
            pending.setdefault(sender, set()).update(receivers)
        delivered = {}
        for v in sorted(victims):
            keep = frozenset(r for r in sorted(pending.get(v, ()))
                             if self.rng.random() < 0.5)
            delivered[v] = keep
        return CrashDecision(delivered)


class CommitteeAssassin:
    """Kills entire committees the moment they announce themselves.

    Announcement envelopes are dropped wholesale, so from every other
    node's point of view the phase simply has no committee. Hoards its
    budget when a committee is too large to kill outright, and dumps any
    remainder on random bystanders at the final phase.
    """

    name = "committee_assassin"

    def __init__(self, budget: int, seed: int, total_phases: int):
        self.rng = random.Random(derive_int(seed, "adversary", self.name))
        self.total_phases = total_phases

    def decide(self, view):
        if view.subround != 1 or view.budget_left == 0:
            return None
        announcers = sorted({s for s, mtype, _, _ in view.pending
                             if mtype == MsgType.ELECT_NOTIFY})
        delivered = {}
        if announcers and len(announcers) <= view.budget_left:
            for v in announcers:
                delivered[v] = frozenset()
        spare = view.budget_left - len(delivered)
        if view.phase == self.total_phases - 1 and spare > 0:
            bystanders = [v for v in view.live
                          if v not in delivered and v not in announcers]
            for v in self.rng.sample(bystanders, min(spare, len(bystanders))):
                delivered[v] = frozenset()
        return CrashDecision(delivered) if delivered else None


class RebuildForcer:
    """Crashes responding committee members mid-send so only a random
    half of each response map gets out, splitting survivors' views."""

    name = "rebuild_forcer"

    def __init__(self, budget: int, seed: int):
        self.rng = random.Random(derive_int(seed, "adversary", self.name))

    def decide(self, view):
        if view.subround != 3 or view.budget_left == 0:
            return None
        responders = [(s, receivers) for s, mtype, _, receivers in view.pending
                      if mtype == MsgType.COMMITTEE_RESPONSE]
        if not responders:
            return None
        k = min(len(responders), view.budget_left)
        chosen = self.rng.sample(responders, k)
        delivered = {}
        for sender, receivers in sorted(chosen):
            keep = frozenset(r for r in receivers if self.rng.random() < 0.5)
            delivered[sender] = keep
        return CrashDecision(delivered)


CRASH_ADVERSARIES = ("none", "uniform_random", "committee_assassin", "rebuild_forcer")


def make_crash_adversary(name: str, budget: int, seed: int,
                         total_rounds: int, total_phases: int):
    if name == "none":
        return NoCrashes()
    if name == "uniform_random":
        return UniformRandomCrasher(budget, seed, total_rounds)
    if name == "committee_assassin":
        return CommitteeAssassin(budget, seed, total_phases)
    if name == "rebuild_forcer":
        return RebuildForcer(budget, seed)
    raise ConfigError(f"unknown crash adversary {name!r}")


# ---- Byzantine strategies -----------------------------------------------


@dataclass(frozen=True)
class StrategyContext:
    """Static trial facts handed to a strategy once, before round one."""

    all_ids: tuple
    correct: tuple
    corrupt: tuple
    winners: frozenset
    correct_members: tuple
    n: int
    N: int
    seed: int


class ByzStrategy:
    """Base strategy: corrupt nodes stay completely silent."""

    name = "silent"

    def __init__(self, seed: int):
        self.seed = seed
        self.ctx: StrategyContext | None = None

    def setup(self, ctx: StrategyContext) -> None:
        self.ctx = ctx

    def _half(self, label: str, b: int, pool: tuple) -> tuple:
        rng = random.Random(derive_int(self.seed, "byz", self.name, label, b))
        return tuple(sorted(rng.sample(pool, len(pool) // 2)))

    # Each hook returns {corrupt_id: [SendSpec, ...]}.
    def elect(self) -> dict:
        return {}

    def announce(self) -> dict:
        return {}

    def val_init(self, call: int) -> dict:
        return {}

    def val_echo(self, call: int) -> dict:
        return {}

    def diff(self, call: int) -> dict:
        return {}

    def cons_vote(self, call: int, phase: int) -> dict:
        return {}

    def cons_propose(self, call: int, phase: int) -> dict:
        return {}

    def cons_king(self, call: int, phase: int) -> dict:
        return {}

    def new_round(self) -> dict:
        return {}

    # shared building blocks
    def _elect_everywhere(self) -> dict:
        ctx = self.ctx
        out = {}
        for b in ctx.corrupt:
            if b in ctx.winners:
                out[b] = [SendSpec(ctx.all_ids, MsgType.ELECT, b)]
        return out

    def _alternating(self, values, shift: int = 0) -> dict:
        """Per-receiver payload map splitting correct members by parity."""
        members = self.ctx.correct_members
        return {v: values[(i + shift) % len(values)] for i, v in enumerate(members)}


class SilentByz(ByzStrategy):
    name = "silent"


class SelectiveAnnouncer(ByzStrategy):
    """Splits views and identity lists, then goes quiet.

    Corrupt winners announce membership to only half the correct nodes,
    and every corrupt node announces its id to only half the correct
    members, so fingerprints disagree on each corrupt position.
    """

    name = "selective_announcer"

    def elect(self) -> dict:
        ctx = self.ctx
        out = {}
        for b in ctx.corrupt:
            if b in ctx.winners:
                targets = self._half("elect", b, ctx.correct)
                if targets:
                    out[b] = [SendSpec(targets, MsgType.ELECT, b)]
        return out

    def announce(self) -> dict:
        ctx = self.ctx
        out = {}
        for b in ctx.corrupt:
            targets = self._half("announce", b, ctx.correct_members)
            if targets:
                out[b] = [SendSpec(targets, MsgType.ID_ANNOUNCE, b)]
        return out


class ListPoisoner(ByzStrategy):
    """Never joins the committee; only poisons identity lists by halves."""

    name = "list_poisoner"

    def announce(self) -> dict:
        ctx = self.ctx
        out = {}
        for b in ctx.corrupt:
            targets = self._half("announce", b, ctx.correct_members)
            if targets:
                out[b] = [SendSpec(targets, MsgType.ID_ANNOUNCE, b)]
        return out


class _PoisonOneMixin:
    """Announce fully except one id, forcing real validation rounds."""

    def announce(self) -> dict:
        ctx = self.ctx
        out = {}
        for b in ctx.corrupt:
            if b == ctx.corrupt[0]:
                targets = self._half("announce", b, ctx.correct_members)
            else:
                targets = ctx.correct_members
            if targets:
                out[b] = [SendSpec(targets, MsgType.ID_ANNOUNCE, b)]
        return out


class ValidatorEquivocator(_PoisonOneMixin, ByzStrategy):
    """Sends conflicting validation values to alternating members."""

    name = "validator_equivocator"

    def elect(self) -> dict:
        return self._elect_everywhere()

    def _equivocate(self, mtype: MsgType, call: int) -> dict:
        ctx = self.ctx
        if not ctx.correct_members:
            return {}
        out = {}
        for i, b in enumerate(ctx.corrupt):
            if b not in ctx.winners:
                continue
            payload = self._alternating(((0, 0), (1, 1)), shift=call + i)
            out[b] = [SendSpec(ctx.correct_members, mtype, payload, mapped=True)]
        return out

    def val_init(self, call: int) -> dict:
        return self._equivocate(MsgType.VAL_INIT, call)

    def val_echo(self, call: int) -> dict:
        return self._equivocate(MsgType.VAL_ECHO, call)

    def diff(self, call: int) -> dict:
        ctx = self.ctx
        if not ctx.correct_members:
            return {}
        out = {}
        for i, b in enumerate(ctx.corrupt):
            if b not in ctx.winners:
                continue
            payload = self._alternating((0, 1), shift=call + i)
            out[b] = [SendSpec(ctx.correct_members, MsgType.DIFF_REPORT, payload,
                               mapped=True)]
        return out


class ConsensusSaboteur(_PoisonOneMixin, ByzStrategy):
    """Equivocates through every consensus round, king rounds included."""

    name = "consensus_saboteur"

    def elect(self) -> dict:
        return self._elect_everywhere()

    def _split_bits(self, mtype: MsgType, shift: int) -> dict:
        ctx = self.ctx
        if not ctx.correct_members:
            return {}
        out = {}
        for i, b in enumerate(ctx.corrupt):
            if b not in ctx.winners:
                continue
            payload = self._alternating((0, 1), shift=shift + i)
            out[b] = [SendSpec(ctx.correct_members, mtype, payload, mapped=True)]
        return out

    def diff(self, call: int) -> dict:
        return self._split_bits(MsgType.DIFF_REPORT, call)

    def cons_vote(self, call: int, phase: int) -> dict:
        return self._split_bits(MsgType.CONS_VOTE, call + phase)

    def cons_propose(self, call: int, phase: int) -> dict:
        return self._split_bits(MsgType.CONS_VOTE, call + phase + 1)

    def cons_king(self, call: int, phase: int) -> dict:
        return self._split_bits(MsgType.CONS_LEADER, call + phase)

    def new_round(self) -> dict:
        ctx = self.ctx
        out = {}
        targets = ctx.correct
        for i, b in enumerate(ctx.corrupt):
            if b not in ctx.winners or not targets:
                continue
            # 0 is the "no grant" sentinel in rank payloads
            payload = {u: (0 if (j + i) % 3 == 0 else (j % ctx.n) + 1)
                       for j, u in enumerate(targets)}
            out[b] = [SendSpec(targets, MsgType.NEW, payload, mapped=True)]
        return out


BYZ_STRATEGIES = ("silent", "selective_announcer", "list_poisoner",
                  "validator_equivocator", "consensus_saboteur")

_BYZ_CLASSES = {cls.name: cls for cls in
                (SilentByz, SelectiveAnnouncer, ListPoisoner,
                 ValidatorEquivocator, ConsensusSaboteur)}


def make_byz_strategy(name: str, seed: int) -> ByzStrategy:
    cls = _BYZ_CLASSES.get(name)
    if cls is None:
        raise ConfigError(f"unknown byzantine strategy {name!r}")
    return cls(seed)
