"""Byzantine-resilient strong renaming.

A randomized lottery elects a committee; everyone announces their id to
the committee members they know of. Members then agree on the joint
identity list by divide and conquer: each list segment is fingerprinted
and validated, consensus settles whether the committee agrees on it,
and disputed segments split in half down to single positions, which are
settled by consensus on the raw bit. Settled counts turn the list into
ranks, which members hand back to every announcer; nodes adopt the
majority rank among the committee grants.

Rounds whose outcome is already forced for every correct member (all
correct inputs equal, or no value can reach the echo threshold) are
fast-forwarded: the engine advances the round clock and counters by the
exact traffic the correct members would have sent, and the corrupt
nodes' own traffic (tracked separately anyway) is omitted. Trace
logging or the no_fast_forward override disables the shortcut.
"""

from __future__ import annotations

import random
from bisect import bisect_left, bisect_right
from collections import Counter

from . import consensus as cons
from .adversaries import StrategyContext, make_byz_strategy
from .bitcodec import MsgType, WidthTable, size_bits
from .byz_params import ByzParams
from .engine import Engine, LOG_OFF, LOG_TRACE, SendSpec, Transcript
from .errors import ConfigError, MonitorViolation, TimeoutError_
from .fingerprint import SegmentHasher
from .intervals import bot, top
from .monitors import ByzMonitor
from .randomness import SharedRandomness, derive_int
from .validator import echo_value, finalize

DEFAULT_EPSILON0 = 0.05

_BYZ_OVERRIDE_KEYS = {"epsilon0", "p0", "no_fast_forward", "count_delivered_only"}

# in NEW payloads 0 means "announced but not rankable here"; ranks start at 1
NULL_GRANT = 0


def _const(specs):
    return lambda rnd: specs


class _Camp:
    """Members that heard the same announcement set; they act identically.

    Membership is fixed at the announce round: the list state evolves
    only through deterministic functions of agreed values, so members of
    a camp can never diverge, and camps with different announcement sets
    never coincide (their grant targets differ).
    """

    __slots__ = ("announced_ids", "announced", "dirty", "members")

    def __init__(self, announced_ids, announced, dirty, members):
        self.announced_ids = announced_ids
        self.announced = announced
        self.dirty = dirty
        self.members = members


class _ByzTrial:
    def __init__(self, n: int, N: int, seed: int, strategy_name: str, f: int,
                 overrides: dict, log_level: str):
        bad = set(overrides) - _BYZ_OVERRIDE_KEYS
        if bad:
            raise ConfigError(f"unknown override keys {sorted(bad)}")
        if not 0 <= f < n:
            raise ConfigError(f"corrupt budget must lie in [0, n), got {f}")
        self.n = n
        self.N = N
        self.seed = seed
        self.f = f
        self.params = ByzParams.for_namespace(
            n, N, overrides.get("epsilon0", DEFAULT_EPSILON0), overrides.get("p0"))
        self.widths = WidthTable.for_namespace(n, N)
        self.log_level = log_level

        ids = sorted(random.Random(derive_int(seed, "byz-ids")).sample(range(1, N + 1), n))
        self.ids = ids
        corrupt = sorted(random.Random(derive_int(seed, "byz-corrupt")).sample(ids, f))
        self.corrupt_set = frozenset(corrupt)
        self.correct = tuple(u for u in ids if u not in self.corrupt_set)

        self.shared = SharedRandomness(seed)
        self.winners = frozenset(u for u in ids
                                 if self.shared.coin("lottery", u, self.params.p0))
        self.g_win = tuple(u for u in self.correct if u in self.winners)
        self.b_win = tuple(u for u in corrupt if u in self.winners)
        self.members = self.g_win
        self.regime = (len(self.g_win) >= self.params.c_g
                       and len(self.b_win) < self.params.c_g / 2.0)
        self._ff_ok = (self.regime
                       and not overrides.get("no_fast_forward", False)
                       and log_level != LOG_TRACE)

        self.engine = Engine(n, N, self.widths, log_level,
                             count_delivered_only=overrides.get(
                                 "count_delivered_only", False),
                             byz_ids=self.corrupt_set)
        self.strategy = make_byz_strategy(strategy_name, seed)
        self.strategy.setup(StrategyContext(
            all_ids=tuple(ids), correct=self.correct, corrupt=tuple(corrupt),
            winners=self.winners, correct_members=self.g_win, n=n, N=N, seed=seed))
        self.monitor = ByzMonitor(n, N, f, self.params.c_g, self.correct, corrupt)

        self._bits = {m: size_bits(m, self.widths) for m in MsgType}
        self._view: dict = {}
        self._view_t: dict = {}
        self._view_pool: dict = {}
        self.camps: list[_Camp] = []
        self._settled: list = []
        self._counts: dict = {}
        self._contents: dict = {}
        self._collisions: list = []
        self._adoption: dict = {}
        self._tally_cache: dict = {}
        self._cons_calls = 0
        self._real_cons_calls = 0
        self._val_calls = 0
        self._diff_calls = 0

    # ---- round plumbing -------------------------------------------------

    def _round(self, stage: str, correct_sends: dict, byz_sends: dict,
               handlers: dict) -> None:
        senders = {v: _const(specs) for v, specs in correct_sends.items() if specs}
        for b, specs in byz_sends.items():
            if b not in self.corrupt_set:
                raise ConfigError(f"strategy sent from non-corrupt id {b}")
            if specs:
                senders[b] = _const(specs)
        # part/group object ids are only stable within a round
        self._tally_cache = {}
        self.engine.run_round(senders, handlers, adversary=None, stage=stage)

    def _tally(self, inbox, me: int, mtypes) -> Counter:
        """Per-sender deduplicated counts, accepting only this member's view.

        Members with the same view, shared parts, and identical mapped
        entries get the same tally, so it is cached for the round.
        """
        view = self._view[me]
        mapped_for_me = []
        for part in inbox.parts:
            for g in part.groups:
                if g.mapped and g.mtype in mtypes:
                    entry = g.payload.get(me)
                    if entry is not None:
                        mapped_for_me.append((id(g), entry))
        key = (inbox.key, view, mtypes, tuple(mapped_for_me))
        got = self._tally_cache.get(key)
        if got is not None:
            return got
        per_sender: dict = {}
        for s, mtype, payload in inbox.items():
            if mtype not in mtypes or s not in view:
                continue
            prev = per_sender.get(s)
            if prev is None or payload < prev:
                per_sender[s] = payload
        got = Counter(per_sender.values())
        self._tally_cache[key] = got
        return got

    def _event(self, *entry) -> None:
        if self.log_level != LOG_OFF:
            self.engine.events.append(entry)

    # ---- stages ---------------------------------------------------------

    def _elect_round(self) -> None:
        all_ids_t = tuple(self.ids)
        sends = {u: [SendSpec(all_ids_t, MsgType.ELECT, u)] for u in self.g_win}
        collected: dict = {}

        def mk(u):
            def handler(rnd, inbox):
                view = set()
                for s, mtype, payload in inbox.items():
                    if mtype is MsgType.ELECT and payload == s and s in self.winners:
                        view.add(s)
                collected[u] = frozenset(view)
            return handler

        self._round("elect", sends, self.strategy.elect(),
                    {u: mk(u) for u in self.correct})
        for u in self.correct:
            vw = collected.get(u, frozenset())
            self._view[u] = vw
            tup = self._view_pool.get(vw)
            if tup is None:
                tup = tuple(sorted(vw))
                self._view_pool[vw] = tup
            self._view_t[u] = tup
        self.engine.metrics.committee_size_history.append(
            len(self.g_win) + len(self.b_win))

    def _announce_round(self) -> None:
        sends = {u: [SendSpec(self._view_t[u], MsgType.ID_ANNOUNCE, u)]
                 for u in self.correct if self._view_t[u]}
        heard: dict = {}

        def mk(v):
            def handler(rnd, inbox):
                got = set()
                for s, mtype, payload in inbox.items():
                    if mtype is MsgType.ID_ANNOUNCE and payload == s:
                        got.add(s)
                heard[v] = got
            return handler

        self._round("announce", sends, self.strategy.announce(),
                    {v: mk(v) for v in self.members})
        groups: dict = {}
        for v in self.members:
            groups.setdefault(tuple(sorted(heard.get(v, ()))), []).append(v)
        for ids_t, mem in sorted(groups.items()):
            mask = 0
            for u in ids_t:
                mask |= 1 << (u - 1)
            self.camps.append(_Camp(ids_t, mask, frozenset(), tuple(sorted(mem))))

    def _build_schedule(self) -> None:
        members = self.members
        self._s_all = sum(len(self._view_t[v]) for v in members)
        universe = tuple(sorted(set().union(
            *(self._view[v] for v in members)))) if members else ()
        self._pos_tables = [cons.leader_positions(self.seed, "byz", t, universe)
                            for t in range(cons.PHASES)]
        self._leader_cache: dict = {}
        self._believers = []
        for t in range(cons.PHASES):
            total = 0
            for v in members:
                if self._leader(t, v) == v:
                    total += len(self._view_t[v])
            self._believers.append(total)

    def _leader(self, t: int, v: int):
        tup = self._view_t[v]
        key = (t, id(tup))
        if key not in self._leader_cache:
            self._leader_cache[key] = cons.leader_of(tup, self._pos_tables[t])
        return self._leader_cache[key]

    # ---- consensus ------------------------------------------------------

    def _ff_consensus_phases(self, start: int) -> None:
        vote_bits = self._bits[MsgType.CONS_VOTE]
        lead_bits = self._bits[MsgType.CONS_LEADER]
        for t in range(start, cons.PHASES):
            self.engine.fast_forward(2, self._s_all, self._s_all * vote_bits,
                                     stage="loop")
            b_t = self._believers[t]
            self.engine.fast_forward(1, b_t, b_t * lead_bits, stage="loop")

    def _real_consensus_phase(self, call: int, t: int, cur: dict) -> None:
        members = self.members
        c_g = self.params.c_g
        tallies: dict = {}

        def mk_tally(v, into, types):
            def handler(rnd, inbox):
                into[v] = self._tally(inbox, v, types)
            return handler

        sends = {v: [SendSpec(self._view_t[v], MsgType.CONS_VOTE, cur[v])]
                 for v in members}
        self._round("loop", sends, self.strategy.cons_vote(call, t),
                    {v: mk_tally(v, tallies, (MsgType.CONS_VOTE,)) for v in members})

        ptallies: dict = {}
        sends = {}
        for v in members:
            sv = cons.strong_value(tallies[v], c_g)
            if sv is not None:
                sends[v] = [SendSpec(self._view_t[v], MsgType.CONS_VOTE, sv)]
        self._round("loop", sends, self.strategy.cons_propose(call, t),
                    {v: mk_tally(v, ptallies, (MsgType.CONS_VOTE,)) for v in members})

        kings: dict = {}
        sends = {}
        for v in members:
            if self._leader(t, v) == v:
                sends[v] = [SendSpec(self._view_t[v], MsgType.CONS_LEADER,
                                     cons.king_value(ptallies[v], cur[v], c_g))]

        def mk_king(v):
            lead = self._leader(t, v)

            def handler(rnd, inbox):
                best = None
                for s, mtype, payload in inbox.items():
                    if mtype is MsgType.CONS_LEADER and s == lead:
                        if best is None or payload < best:
                            best = payload
                kings[v] = best
            return handler

        self._round("loop", sends, self.strategy.cons_king(call, t),
                    {v: mk_king(v) for v in members})
        for v in members:
            cur[v] = cons.resolve(ptallies[v], kings.get(v), cur[v], c_g)

    def _consensus(self, label: str, inputs: dict) -> int:
        self._cons_calls += 1
        call = self._cons_calls
        cur = dict(inputs)
        ran_real = False
        t = 0
        while t < cons.PHASES:
            if self._ff_ok and len(set(cur.values())) == 1:
                self._ff_consensus_phases(t)
                break
            self._real_consensus_phase(call, t, cur)
            ran_real = True
            t += 1
        if ran_real:
            self._real_cons_calls += 1
        return self.monitor.on_consensus(label, cur)

    # ---- validator and mismatch reports ---------------------------------

    def _validator(self, values: dict) -> tuple[dict, dict]:
        self._val_calls += 1
        call = self._val_calls
        members = self.members
        c_g = self.params.c_g
        init_bits = self._s_all * self._bits[MsgType.VAL_INIT]
        distinct = set(values.values())
        if self._ff_ok and len(distinct) == 1:
            x = distinct.pop()
            self.engine.fast_forward(1, self._s_all, init_bits, stage="loop")
            self.engine.fast_forward(1, self._s_all,
                                     self._s_all * self._bits[MsgType.VAL_ECHO],
                                     stage="loop")
            return {v: 1 for v in members}, {v: x for v in members}
        camp_sizes = Counter(values.values())
        if self._ff_ok and max(camp_sizes.values()) + len(self.b_win) < c_g:
            # no value can reach the echo threshold, so nobody echoes
            self.engine.fast_forward(1, self._s_all, init_bits, stage="loop")
            self.engine.fast_forward(1, 0, 0, stage="loop")
            return {v: 0 for v in members}, dict(values)

        tallies: dict = {}

        def mk_tally(v, into, types):
            def handler(rnd, inbox):
                into[v] = self._tally(inbox, v, types)
            return handler

        sends = {v: [SendSpec(self._view_t[v], MsgType.VAL_INIT, values[v])]
                 for v in members}
        self._round("loop", sends, self.strategy.val_init(call),
                    {v: mk_tally(v, tallies, (MsgType.VAL_INIT,)) for v in members})

        etallies: dict = {}
        sends = {}
        for v in members:
            e = echo_value(tallies[v], c_g)
            if e is not None:
                sends[v] = [SendSpec(self._view_t[v], MsgType.VAL_ECHO, e)]
        self._round("loop", sends, self.strategy.val_echo(call),
                    {v: mk_tally(v, etallies, (MsgType.VAL_ECHO,)) for v in members})

        same: dict = {}
        outs: dict = {}
        for v in members:
            same[v], outs[v] = finalize(etallies[v], values[v], c_g)
        return same, outs

    def _diff_round(self, diffs: dict) -> dict:
        self._diff_calls += 1
        bits = self._s_all * self._bits[MsgType.DIFF_REPORT]
        if self._ff_ok and len(set(diffs.values())) == 1:
            self.engine.fast_forward(1, self._s_all, bits, stage="loop")
            return dict(diffs)
        tallies: dict = {}

        def mk(v):
            def handler(rnd, inbox):
                tallies[v] = self._tally(inbox, v, (MsgType.DIFF_REPORT,))
            return handler

        sends = {v: [SendSpec(self._view_t[v], MsgType.DIFF_REPORT, diffs[v])]
                 for v in self.members}
        self._round("loop", sends, self.strategy.diff(self._diff_calls),
                    {v: mk(v) for v in self.members})
        out = {}
        for v in self.members:
            ones = tallies[v].get(1, 0)
            out[v] = 1 if ones > self.params.c_g / 2.0 else diffs[v]
        return out

    # ---- the divide-and-conquer loop ------------------------------------

    def _inside(self, pool, lo: int, hi: int) -> int:
        return bisect_right(pool, hi) - bisect_left(pool, lo)

    def _loop(self) -> None:
        if not self.members:
            return
        camps = self.camps
        # per-camp segment slices travel down the stack so narrowing a
        # segment costs the segment's width, not the whole list's
        stack = [((1, self.N), [c.announced for c in camps])]
        correct_sorted = list(self.correct)
        while stack:
            self.monitor.on_iteration()
            it = self.monitor.iterations
            j, segs = stack.pop()
            lo, hi = j
            if lo == hi:
                inputs = {v: segs[i] for i, camp in enumerate(camps)
                          for v in camp.members}
                agreed = self._consensus(f"bit-{lo}", inputs)
                self._settle_contents(j, agreed, [agreed] * len(camps))
                self._event("leaf", lo, agreed)
                continue

            length = hi - lo + 1
            hasher = SegmentHasher(self.shared, it, self.widths.fp_w)
            digest_cache: dict = {}
            vals = []
            values: dict = {}
            for i, camp in enumerate(camps):
                seg = segs[i]
                val = digest_cache.get(seg)
                if val is None:
                    val = (hasher.digest(seg, length), seg.bit_count())
                    digest_cache[seg] = val
                vals.append(val)
                for v in camp.members:
                    values[v] = val

            same_in, outs = self._validator(values)
            same2 = self._consensus(f"same-{it}", same_in)
            if same2 == 1:
                outset = set(outs.values())
                # graded validation guarantees identical outputs here
                assert len(outset) == 1, f"graded outputs split: {outset}"
                agreed_out = outset.pop()
            else:
                agreed_out = None

            diffs = {}
            mismatched = []
            for i, camp in enumerate(camps):
                mm = same2 == 1 and vals[i] != agreed_out
                mismatched.append(mm)
                for v in camp.members:
                    diffs[v] = 1 if mm else 0
            diff1 = self._diff_round(diffs)
            diff2 = self._consensus(f"diff-{it}", diff1)

            if same2 == 1 and diff2 == 0:
                cntp = agreed_out[1]
                fill = (1 << cntp) - 1
                contents = []
                clean_correct = 0
                clean_segs = set()
                for i, camp in enumerate(camps):
                    if mismatched[i]:
                        camp.dirty = camp.dirty | {j}
                        contents.append(fill)
                    else:
                        contents.append(segs[i])
                        clean_correct += len(camp.members)
                        clean_segs.add(segs[i])
                if len(clean_segs) > 1:
                    self._collisions.append(j)
                    self._event("collision", lo, hi)
                self._settle_contents(j, cntp, contents)
                self.monitor.on_settle(
                    j, cntp,
                    self._inside(correct_sorted, lo, hi),
                    self._inside(self.ids, lo, hi),
                    clean_correct)
                self._event("settle", lo, hi, cntp)
            else:
                blen = bot(j)[1] - lo + 1
                bmask = (1 << blen) - 1
                stack.append((top(j), [s >> blen for s in segs]))
                stack.append((bot(j), [s & bmask for s in segs]))
                self._event("split", lo, hi)

    def _settle_contents(self, j, count: int, contents: list) -> None:
        self._settled.append(j)
        self._counts[j] = count
        self._contents[j] = contents

    # ---- distribution and adoption ---------------------------------------

    def _final_bytes(self, camp_index: int) -> bytes:
        """Reassemble this camp's settled list as little-endian bit bytes."""
        size = (self.N + 7) // 8
        ba = bytearray(size)
        rem = 0
        for (lo, hi), contents in self._contents.items():
            content = contents[camp_index]
            length = hi - lo + 1
            if (lo - 1) & 7 == 0 and length & 7 == 0:
                off = (lo - 1) >> 3
                ba[off:off + length // 8] = content.to_bytes(length // 8, "little")
            elif content:
                rem |= content << (lo - 1)
        if rem:
            ba = bytearray((int.from_bytes(ba, "little") | rem)
                           .to_bytes(size, "little"))
        return bytes(ba)

    _POP_CHUNK = 512  # bytes per cumulative popcount step

    def _rank_fn(self, ba: bytes):
        chunk = self._POP_CHUNK
        cums = [0]
        total = 0
        for off in range(0, len(ba), chunk):
            total += int.from_bytes(ba[off:off + chunk], "little").bit_count()
            cums.append(total)

        def rank(u: int) -> int:
            last = u - 1
            nbyte = last >> 3
            ci = nbyte // chunk
            start = ci * chunk
            mid = (int.from_bytes(ba[start:nbyte], "little").bit_count()
                   if nbyte > start else 0)
            tail = ba[nbyte] & ((1 << ((last & 7) + 1)) - 1)
            return cums[ci] + mid + tail.bit_count()
        return rank

    def _distribute_and_adopt(self) -> dict:
        sends = {}
        for i, camp in enumerate(self.camps):
            targets = camp.announced_ids
            if not targets:
                continue
            ba = self._final_bytes(i)
            rank = self._rank_fn(ba)
            dirty_sorted = sorted(camp.dirty)
            payload = {}
            for u in targets:
                in_dirty = any(dlo <= u <= dhi for dlo, dhi in dirty_sorted)
                has_bit = (ba[(u - 1) >> 3] >> ((u - 1) & 7)) & 1
                if in_dirty or not has_bit:
                    payload[u] = NULL_GRANT
                else:
                    payload[u] = rank(u)
            for v in camp.members:
                sends[v] = [SendSpec(targets, MsgType.NEW, payload, mapped=True)]

        def mk(u):
            view = self._view[u]

            def handler(rnd, inbox):
                per_sender: dict = {}
                for s, mtype, payload in inbox.items():
                    if mtype is not MsgType.NEW or s not in view:
                        continue
                    key = (payload == NULL_GRANT, payload)
                    prev = per_sender.get(s)
                    if prev is None or key < prev:
                        per_sender[s] = key
                grants = Counter(p for isnull, p in per_sender.values()
                                 if not isnull)
                name = None
                if grants:
                    name = min(grants.items(), key=lambda kv: (-kv[1], kv[0]))[0]
                self._adoption[u] = (len(per_sender), name)
            return handler

        self._round("distribute", sends, self.strategy.new_round(),
                    {u: mk(u) for u in self.correct})

        names = {}
        self._adopt_failures = []
        for u in self.correct:
            arrived, name = self._adoption.get(u, (0, None))
            if arrived >= self.params.c_g and name is not None:
                names[u] = name
            else:
                self._adopt_failures.append(u)
        return names

    # ---- trial ------------------------------------------------------------

    def _classify(self, violation: MonitorViolation | None) -> str:
        if self._collisions:
            return "hash-collision"
        if not self.regime:
            return "committee-tail"
        if violation is not None and violation.monitor == "segment-lockstep":
            # a leader schedule with no aligned correct phase; same budget
            # as the committee-size tail and equally seed-determined
            return "committee-tail"
        if violation is not None:
            return f"monitor:{violation.monitor}"
        return "adoption-timeout"

    def run(self) -> Transcript:
        names: dict = {}
        failure_cause = None
        monitor_failures: list = []
        try:
            self._elect_round()
            self.monitor.on_views(self._view, self.g_win, self.b_win)
            self._announce_round()
            self._build_schedule()
            self._loop()
            names = self._distribute_and_adopt()
            if self._adopt_failures:
                raise TimeoutError_(
                    f"{len(self._adopt_failures)} nodes below the grant quorum")
            self.monitor.on_final(self._settled, names)
        except MonitorViolation as mv:
            monitor_failures.append(mv.monitor)
            failure_cause = self._classify(mv)
        except TimeoutError_:
            failure_cause = self._classify(None)

        outcome: dict = {}
        for u in self.ids:
            if u in self.corrupt_set:
                outcome[u] = "byzantine"
            else:
                outcome[u] = names.get(u)

        tr = Transcript(
            protocol="byz", n=self.n, N=self.N, seed=self.seed,
            metrics=self.engine.metrics, events=self.engine.events,
            outcome=outcome, success=failure_cause is None,
            failure_cause=failure_cause, monitor_failures=monitor_failures,
            f_actual=self.f,
            extra={
                "strategy": self.strategy.name,
                "iterations": self.monitor.iterations,
                "g_win": len(self.g_win),
                "b_win": len(self.b_win),
                "regime": self.regime,
                "epsilon0": self.params.epsilon0,
                "p0": self.params.p0,
                "c_g": self.params.c_g,
                "c_hat_g": self.params.c_hat_g,
                "f_bound": self.params.f_bound,
                "consensus_calls": self._cons_calls,
                "real_consensus_calls": self._real_cons_calls,
                "validator_calls": self._val_calls,
                "collisions": len(self._collisions),
                "camps_final": len(self.camps),
                "dirty_camps": sum(1 for c in self.camps if c.dirty),
                "mean_view": (round(self._s_all / len(self.members), 3)
                              if self.members else 0.0),
                "adoption_failures": len(getattr(self, "_adopt_failures", [])),
            })
        return tr


def run_byz_trial(n: int, N: int, seed: int, adversary: dict | None = None,
                  overrides: dict | None = None,
                  log_level: str = LOG_OFF) -> Transcript:
    """One full trial; returns a transcript whether it succeeds or fails."""
    adversary = adversary or {"name": "silent", "budget_f": 0}
    trial = _ByzTrial(n, N, seed, adversary.get("name", "silent"),
                      int(adversary.get("budget_f", 0)),
                      overrides or {}, log_level)
    return trial.run()
