"""Acceptance runs: one test per shipping criterion, at desk scale.

The two big grids (crash and Byzantine) run once in session fixtures and
feed several criteria each. Every test ends by printing a single
machine-greppable verdict line; run with -s (or read captured output) to
see the measured numbers behind each PASS.
"""

import hashlib
import math
import time

import pytest

from rename_sim.byz_protocol import run_byz_trial
from rename_sim.crash_oracle import exhaustive_check
from rename_sim.crash_protocol import run_crash_trial
from rename_sim.harness import (
    SweepSpec,
    build_tasks,
    row_from_transcript,
    run_sweep,
    write_raw_csv,
)
from rename_sim.bitcodec import ceil_log2

pytestmark = pytest.mark.acceptance

CRASH_GRID = {
    "protocol": "crash",
    "n_values": [4, 8, 16, 64, 256],
    "f_values": [0, 1, "n/8", "n/2", "n-1"],
    "adversaries": ["none", "uniform_random", "committee_assassin",
                    "rebuild_forcer"],
    "trials_per_cell": 100,
    "N": "2n",
}
CRASH_GRID_BUDGET_S = 300.0

BYZ_GRID = {
    "protocol": "byz",
    "n_values": [32, 64, 128],
    "f_values": [0, 1, "n/10", "fbound"],
    "adversaries": ["silent", "selective_announcer", "list_poisoner",
                    "validator_equivocator", "consensus_saboteur"],
    "trials_per_cell": 100,
    "epsilon0": 0.05,
    "N": "5n^2",
}
BYZ_ALLOWED_CAUSES = {"hash-collision", "committee-tail"}

# Hard message cap, frozen after the first calibration run: the saturated
# default election lands at 9*log2(n)*n^2 sent messages, so 16 leaves
# headroom without hiding a regression to all-to-all chatter.
HARD_CAP_COEFF = 16.0

# Sub-saturated election rates for the scaling sweeps. The default rate
# elects everyone at these n, which is correct but swamps the terms the
# sweeps are supposed to expose. 4.0 keeps committees near 4*log2(n) so
# the fault-free cost tracks n*log2(n)^2; 0.5 starts committees small
# enough that an assassin with budget 8 can wipe one out, which is what
# makes the per-fault term visible at every budget in the sweep.
LOG_SWEEP_COEFF = 4.0
ASSASSIN_COEFF = 0.5

SWEEP_SEEDS = 10


def _verdict(num: int, detail: str) -> None:
    print(f"[criterion {num:02d}] PASS {detail}")


@pytest.fixture(scope="session")
def crash_grid():
    spec = SweepSpec.from_dict(CRASH_GRID)
    tasks = build_tasks(spec)
    t0 = time.perf_counter()
    rows = run_sweep(spec, jobs=1)
    elapsed = time.perf_counter() - t0
    return spec, tasks, rows, elapsed


@pytest.fixture(scope="session")
def byz_grid():
    spec = SweepSpec.from_dict(BYZ_GRID)
    tasks = build_tasks(spec)
    rows = []
    trials = []
    for task in tasks:
        _protocol, n, N, adv, f, seed, overrides, log_level = task
        tr = run_byz_trial(n, N, seed, {"name": adv, "budget_f": f},
                           overrides, log_level)
        rows.append(row_from_transcript(task, tr))
        trials.append({
            "n": n, "N": N, "adv": adv, "f": f, "seed": seed,
            "overrides": overrides,
            "success": tr.success,
            "cause": tr.failure_cause,
            "monitors": tuple(tr.monitor_failures),
            "iterations": tr.extra["iterations"],
            "digest": tr.digest(),
        })
    return spec, tasks, rows, trials


def test_criterion_01_crash_grid_always_correct(crash_grid):
    """Every trial renames all survivors into [1, n] on the fixed schedule.

    Success is certified by the end-of-trial monitor: singleton intervals
    for every live node, pairwise-distinct names inside [1, n]. The round
    count must equal the fixed schedule exactly, 1 init round plus 9 per
    halving level, and the whole grid must finish inside its time budget.
    """
    spec, tasks, rows, elapsed = crash_grid
    assert len(rows) == 10000
    failures = [r for r in rows if r[9] != 1]
    assert not failures, f"{len(failures)} trials failed, first: {failures[0]}"
    for task, row in zip(tasks, rows):
        n = row[1]
        assert row[6] == 1 + 9 * ceil_log2(n), (task, row)
        assert row[4] <= task[4], f"spent {row[4]} crashes on budget {task[4]}"
    assert elapsed < CRASH_GRID_BUDGET_S, f"grid took {elapsed:.0f}s"
    _verdict(1, f"crash grid 10000/10000 correct, rounds exact, "
                f"{elapsed:.0f}s < {CRASH_GRID_BUDGET_S:.0f}s")


def test_criterion_02_crash_lemma_monitors_clean(crash_grid):
    """The per-phase lemma monitors never fire anywhere in the grid.

    Each trial checks, at init and at every phase boundary: interval
    occupancy never exceeds capacity, live nodes only shrink intervals
    and bump depths monotonically, the minimum undecided depth advances
    whenever a committee survived, a committee-free phase bumps every
    exponent, and live exponents never spread past 1.
    """
    _spec, _tasks, rows, _elapsed = crash_grid
    dirty = [r for r in rows if r[10]]
    assert not dirty, f"monitor violations: {sorted({r[10] for r in dirty})}"
    checkpoints = sum(2 + 3 * ceil_log2(r[1]) for r in rows)
    _verdict(2, f"lemma monitors clean at {checkpoints} checkpoints "
                f"across 10000 trials")


def test_criterion_03_exhaustive_oracle():
    """The n=4 oracle walk finds no violation; a seeded rank bug is caught."""
    t0 = time.perf_counter()
    clean = exhaustive_check(4)
    assert clean.violation is None, clean.violation
    mutated = exhaustive_check(4, mutation="rank_off_by_one")
    assert mutated.violation is not None
    elapsed = time.perf_counter() - t0
    assert elapsed < 600.0, f"oracle took {elapsed:.0f}s"
    _verdict(3, f"oracle n=4 clean over {clean.states_visited} states, "
                f"rank_off_by_one caught ({mutated.violation['reason']}), "
                f"{elapsed:.0f}s < 600s")


def test_criterion_04_crash_message_scaling(crash_grid):
    """Message counts track the two claimed terms and respect the hard cap.

    Fault-free, with the election rate held at LOG_SWEEP_COEFF, cost per
    n*log2(n)^2 stays inside a 2x band over a 16x range of n. Against the
    committee assassin at n=256 the cost per (f+log2 n)*n*log2(n) stays
    inside a 3x band over a 16x range of f. No trial anywhere, here or in
    the criterion-1 grid, beats HARD_CAP_COEFF*n^2*log2(n).
    """
    coeffs = {}
    capped = []
    for n in (64, 128, 256, 512, 1024):
        msgs = []
        for seed in range(SWEEP_SEEDS):
            tr = run_crash_trial(n, 2 * n, seed, {"name": "none", "budget_f": 0},
                                 overrides={"election_coeff": LOG_SWEEP_COEFF})
            assert tr.success, (n, seed, tr.failure_cause)
            msgs.append(tr.metrics.messages_total)
            capped.append((n, tr.metrics.messages_total))
        lg = math.log2(n)
        coeffs[n] = sum(msgs) / len(msgs) / (n * lg * lg)
    log_ratio = max(coeffs.values()) / min(coeffs.values())
    assert log_ratio < 2.0, f"n*log^2(n) coefficients {coeffs}"

    acoeffs = {}
    lg = math.log2(256)
    for f in (8, 32, 128):
        msgs = []
        for seed in range(SWEEP_SEEDS):
            tr = run_crash_trial(256, 512, seed,
                                 {"name": "committee_assassin", "budget_f": f},
                                 overrides={"election_coeff": ASSASSIN_COEFF})
            assert tr.success, (f, seed, tr.failure_cause)
            msgs.append(tr.metrics.messages_total)
            capped.append((256, tr.metrics.messages_total))
        acoeffs[f] = sum(msgs) / len(msgs) / ((f + lg) * 256 * lg)
    f_ratio = max(acoeffs.values()) / min(acoeffs.values())
    assert f_ratio < 3.0, f"(f+log n)*n*log(n) coefficients {acoeffs}"

    _spec, _tasks, rows, _elapsed = crash_grid
    capped.extend((r[1], r[7]) for r in rows)
    worst = max(m / (HARD_CAP_COEFF * n * n * math.log2(n)) for n, m in capped)
    assert worst <= 1.0, f"hard cap exceeded, worst fraction {worst:.2f}"
    _verdict(4, f"fault-free coefficient band {log_ratio:.2f}x < 2x, "
                f"assassin band {f_ratio:.2f}x < 3x, "
                f"hard cap fraction {worst:.2f} over {len(capped)} trials")


def test_criterion_05_byz_grid_success_rate(byz_grid):
    """At least 99 of 100 seeds per cell succeed; failures carry a cause.

    Success means every correct node got a distinct name in [1, n] and
    the names preserve the order of original ids (the end-of-trial
    monitor enforces both). The only tolerated failure modes are a
    fingerprint collision or a degenerate committee lottery, and each
    failed trial must say which one it hit.
    """
    _spec, _tasks, _rows, trials = byz_grid
    assert len(trials) == 6000
    cells: dict = {}
    for t in trials:
        cells.setdefault((t["n"], t["f"], t["adv"]), []).append(t)
    assert len(cells) == 60
    worst_cell, worst_ok = None, 101
    for key, ts in cells.items():
        ok = sum(1 for t in ts if t["success"])
        if ok < worst_ok:
            worst_cell, worst_ok = key, ok
        assert ok >= 99, f"cell {key}: only {ok}/100 succeeded"
    bad_causes = [t for t in trials
                  if not t["success"] and t["cause"] not in BYZ_ALLOWED_CAUSES]
    assert not bad_causes, f"unexplained failures: {bad_causes[:3]}"
    n_fail = sum(1 for t in trials if not t["success"])
    _verdict(5, f"byz grid {6000 - n_fail}/6000 correct, worst cell "
                f"{worst_cell} at {worst_ok}/100, "
                f"{n_fail} failures all in {sorted(BYZ_ALLOWED_CAUSES)}")


def test_criterion_06_byz_iteration_bound(byz_grid):
    """Loop iterations never exceed 4*max(f,1)*log2(N); fault-free is 1."""
    _spec, _tasks, _rows, trials = byz_grid
    worst = 0.0
    for t in trials:
        cap = 4.0 * max(t["f"], 1) * math.log2(t["N"])
        assert t["iterations"] <= cap, \
            f"{t['n']},{t['adv']},f={t['f']},seed={t['seed']}: " \
            f"{t['iterations']} iterations > {cap:.0f}"
        worst = max(worst, t["iterations"] / cap)
        if t["f"] == 0:
            assert t["iterations"] == 1, \
                f"fault-free trial took {t['iterations']} iterations"
    _verdict(6, f"iterations within 4*max(f,1)*log2(N) on all 6000 trials "
                f"(worst fraction {worst:.2f}), fault-free always exactly 1")


def test_criterion_07_byz_lockstep_and_partition(byz_grid):
    """Committee lockstep and namespace partition hold in every trial.

    Every agreement the committee reaches is checked for exact equality
    across all correct members at the moment it resolves, and the settled
    segments must tile [1, N] with no gap or overlap before any name is
    granted. Either monitor firing anywhere is a failure, no tolerance.
    """
    _spec, _tasks, _rows, trials = byz_grid
    tripped = [t for t in trials
               if {"segment-lockstep", "segment-partition"} & set(t["monitors"])]
    assert not tripped, f"lockstep/partition violations: {tripped[:3]}"
    _verdict(7, "lockstep equality and [1,N] partition held in all "
                "6000 trials")


def test_criterion_08_validator_and_consensus_contracts():
    """Model-level contracts behind the divide-and-conquer loop.

    Validator at 20 correct / 9 corrupt members: unanimity forces a
    graded output, any graded output forces agreement, over 1000 random
    adversarial message plans plus targeted split attempts. Consensus at
    4 correct / 1 corrupt: exhaustive reachability over every input
    pattern and every per-phase corrupt vote mask stays unanimous.
    """
    import test_consensus
    import test_validator

    assert len(test_validator.CORRECT) == 20
    assert len(test_validator.CORRUPT) == 9
    assert len(test_validator.CORRUPT) < test_validator.C_G / 2
    test_validator.test_thousand_adversarial_patterns_keep_contract()
    test_validator.test_targeted_split_attempts_fail()

    assert len(test_consensus.G) == 4
    test_consensus.test_exhaustive_small_committee_model()
    _verdict(8, "validator contract clean over 1000 adversarial patterns "
                "(|G|=20, |B|=9), consensus model check exhaustive at "
                "|G|=4, |B|=1")


def test_criterion_09_byz_message_scaling():
    """Loop traffic scales with f; announce and distribute scale with n*K.

    At n=512 with the election probability pinned to 0.15 the committee
    is far smaller than n. Quadrupling the corruption budget may at most
    quadruple the mean loop-stage message count, while the identity
    announcement plus name distribution stay within a factor 2 of
    n * (committee size measured in that trial).
    """
    n, N = 512, 5 * 512 * 512
    seeds = 50
    loop_mean = {}
    ratio_lo, ratio_hi = math.inf, 0.0
    for f in (1, 4, 16):
        loops = []
        for seed in range(seeds):
            tr = run_byz_trial(n, N, seed,
                               {"name": "selective_announcer", "budget_f": f},
                               overrides={"p0": 0.15})
            assert tr.success, (f, seed, tr.failure_cause)
            sm = tr.metrics.stage_messages
            loops.append(sm.get("loop", 0))
            edge = sm.get("announce", 0) + sm.get("distribute", 0)
            committee = tr.extra["g_win"] + tr.extra["b_win"]
            ratio = edge / (n * committee)
            ratio_lo = min(ratio_lo, ratio)
            ratio_hi = max(ratio_hi, ratio)
            assert 0.5 <= ratio <= 2.0, f"f={f} seed={seed}: edge ratio {ratio:.2f}"
        loop_mean[f] = sum(loops) / len(loops)
    g1 = loop_mean[4] / loop_mean[1]
    g2 = loop_mean[16] / loop_mean[4]
    assert g1 <= 4.0 and g2 <= 4.0, f"loop growth {g1:.2f}, {g2:.2f}"
    _verdict(9, f"loop growth {g1:.2f}x and {g2:.2f}x per 4x budget step, "
                f"announce+distribute inside [{ratio_lo:.2f}, {ratio_hi:.2f}] "
                f"of n*committee over {3 * seeds} trials")


def test_criterion_10_reproducibility(crash_grid, byz_grid, tmp_path):
    """Replays are bit-identical and grid CSVs rerun to the same digest.

    Single trials rerun from their (config, seed) pair must reproduce the
    transcript digest exactly, failed ones included. Rerunning a two-seed
    slice of both grids through the sweep harness must give rows, and
    CSV bytes, identical to the rows already collected.
    """
    c_spec, c_tasks, c_rows, _elapsed = crash_grid
    b_spec, _b_tasks, b_rows, b_trials = byz_grid

    picks = [i for i, t in enumerate(b_trials) if not t["success"]][:5]
    picks.extend([0, len(b_trials) // 2, len(b_trials) - 1])
    for i in picks:
        t = b_trials[i]
        again = run_byz_trial(t["n"], t["N"], t["seed"],
                              {"name": t["adv"], "budget_f": t["f"]},
                              t["overrides"])
        assert again.digest() == t["digest"], f"byz replay diverged: {t}"

    for i in (0, len(c_tasks) // 3, len(c_tasks) - 1):
        _proto, n, N, adv, f, seed, overrides, _lvl = c_tasks[i]
        one = run_crash_trial(n, N, seed, {"name": adv, "budget_f": f}, overrides)
        two = run_crash_trial(n, N, seed, {"name": adv, "budget_f": f}, overrides)
        assert one.digest() == two.digest()
        assert row_from_transcript(c_tasks[i], one) == c_rows[i]

    digests = {}
    for label, grid, spec, rows, jobs in (
        ("crash", CRASH_GRID, c_spec, c_rows, 1),
        ("byz", BYZ_GRID, b_spec, b_rows, 1),
    ):
        slice_spec = SweepSpec.from_dict({**grid, "trials_per_cell": 2})
        rerun = run_sweep(slice_spec, jobs=jobs)
        kept = [r for r in rows if r[5] < 2]
        assert rerun == kept, f"{label} slice rerun diverged"
        p1 = tmp_path / f"{label}_slice_a.csv"
        p2 = tmp_path / f"{label}_slice_b.csv"
        write_raw_csv(rerun, str(p1))
        write_raw_csv(kept, str(p2))
        d1 = hashlib.sha256(p1.read_bytes()).hexdigest()
        d2 = hashlib.sha256(p2.read_bytes()).hexdigest()
        assert d1 == d2
        full = tmp_path / f"{label}_grid.csv"
        write_raw_csv(rows, str(full))
        digests[label] = hashlib.sha256(full.read_bytes()).hexdigest()

    _verdict(10, f"replays bit-identical ({len(picks)} byz, 3 crash), "
                 f"slice reruns digest-equal; grid sha256 "
                 f"crash={digests['crash'][:12]} byz={digests['byz'][:12]}")
