import pytest

from rename_sim.crash_oracle import exhaustive_check, replay_schedule
from rename_sim.errors import BudgetExceeded, ConfigError


def test_n2_and_n3_fully_clean():
    r2 = exhaustive_check(2)
    assert r2.violation is None
    assert r2.phases == 3 and r2.terminal_states > 0
    r3 = exhaustive_check(3)
    assert r3.violation is None
    assert r3.states_visited > r2.states_visited


def test_n4_full_budget_clean():
    rep = exhaustive_check(4)
    assert rep.budget == 3
    assert rep.violation is None
    assert rep.terminal_states > 100  # many distinct crash outcomes reached


def test_mutation_is_caught():
    rep = exhaustive_check(4, mutation="rank_off_by_one")
    assert rep.violation is not None
    assert "duplicate" in rep.violation["reason"]
    # the witness replays to the violating end state
    alive, final = replay_schedule(4, rep.violation["schedule"],
                                   mutation="rank_off_by_one")
    names = [final[v][0] for v in sorted(alive)]
    assert len(set(names)) < len(names)


def test_mutation_caught_even_crash_free():
    rep = exhaustive_check(4, budget=0, mutation="rank_off_by_one")
    assert rep.violation is not None


def test_state_cap_raises():
    with pytest.raises(BudgetExceeded):
        exhaustive_check(4, state_cap=10)


def test_bad_configs():
    with pytest.raises(ConfigError):
        exhaustive_check(7)
    with pytest.raises(ConfigError):
        exhaustive_check(4, budget=4)


def test_crash_free_replay_names_everyone():
    alive, final = replay_schedule(4, [])
    assert sorted(alive) == [1, 2, 3, 4]
    assert sorted(iv[0] for iv in final.values()) == [1, 2, 3, 4]
    assert all(lo == hi for lo, hi, _, _ in final.values())


def test_replay_with_crashes_keeps_survivors_unique():
    # node 2 dies mid-report reaching only member 1; node 3 dies mid-response
    schedule = [
        (0, (), (2,), {2: (1,)}, (), {}),
        (1, (), (), {}, (3,), {3: (1, 4)}),
    ]
    alive, final = replay_schedule(4, schedule)
    assert sorted(alive) == [1, 4]
    names = [final[v][0] for v in sorted(alive)]
    assert len(set(names)) == 2
    assert all(final[v][0] == final[v][1] for v in alive)


@pytest.mark.slow
def test_n5_fully_clean():
    rep = exhaustive_check(5, state_cap=500_000)
    assert rep.violation is None
