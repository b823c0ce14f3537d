import random

import pytest
from hypothesis import given, settings, strategies as st

from bhsring.agent import CW, CCW, LEFT, RIGHT, STAY, Action, Automaton, ProtocolInfo, StateDef
from bhsring.protocols import get_automaton
from bhsring.scenario import InvalidSpec, ScenarioSpec
from bhsring.traceio import dumps_trace
from bhsring.world import (BOUND, DEAD, EXTINCT, INVALID, QUIESCENT, TokenConflict,
                           link_of, new_world, run, step)


def _one_state(action, tokens=1, movable=True):
    info = ProtocolInfo("toy", 1, tokens, movable, False)
    return Automaton(info, [StateDef("GO", action)], "GO")


def test_new_world_round_zero():
    w = new_world(ScenarioSpec(4, 0, (1, 2, 3), "ring1"))
    assert len(w.live) == 3 and w.placed_tokens() == 0 and not w.marks
    assert w.round == 0
    assert [a.location for a in w.agents] == [1, 2, 3]
    assert all(a.carried == 1 for a in w.agents)


@pytest.mark.parametrize("n,bh,hb", [(6, 0, (1, 1, 3)), (6, 0, (0, 2)), (2, 0, (1,)),
                                     (5, 7, (1,))])
def test_new_world_rejects_bad_specs(n, bh, hb):
    with pytest.raises(InvalidSpec):
        new_world(ScenarioSpec(n, bh, hb, "ring1"))


def test_put_and_move_into_black_hole():
    w = new_world(ScenarioSpec(5, 0, (1,), "ring1"), _one_state(Action("put", move=LEFT)))
    rec = step(w, _one_state(Action("put", move=LEFT)))
    assert w.agents[0].status == DEAD
    assert rec.token_deltas == ((1, 1),)
    assert rec.deaths[0].origin == 1 and rec.deaths[0].direction == CW
    assert rec.deaths[0].carried == 0


def test_carried_tokens_are_destroyed():
    A = _one_state(Action(move=LEFT), tokens=2)
    w = new_world(ScenarioSpec(5, 0, (1,), "ring1", tokens=2), A)
    rec = step(w, A)
    assert rec.deaths[0].carried == 2 and w.destroyed == 2


def test_two_puts_at_one_node():
    A = _one_state(Action("put"))
    w = new_world(ScenarioSpec(5, 0, (2, 3), "ring1"), A)
    w.agents[1].location = 2
    rec = step(w, A)
    assert w.tokens[2] == 2 and rec.token_deltas == ((2, 2),)


def test_token_overflow_is_a_conflict():
    A = _one_state(Action("put"))
    w = new_world(ScenarioSpec(5, 0, (2, 3), "ring1"), A)
    w.agents[1].location = 2
    w.tokens[2] = 1
    with pytest.raises(TokenConflict):
        step(w, A)


def test_pick_of_missing_token_is_a_conflict():
    A = _one_state(Action("pick"), tokens=2)
    w = new_world(ScenarioSpec(5, 0, (2,), "ring1", tokens=2), A)
    w.agents[0].carried = 1
    with pytest.raises(TokenConflict):
        step(w, A)


def test_conflict_becomes_fatal_termination():
    A = _one_state(Action("put"))
    w = new_world(ScenarioSpec(5, 0, (2, 3), "ring1"), A)
    w.agents[1].location = 2
    w.tokens[2] = 1
    t = run(w, A, 10)
    assert t.termination == "fault" and "TokenConflict" in t.fault


def test_cautious_walk_four_node_ring():
    A = get_automaton("ring1")
    w = new_world(ScenarioSpec(4, 0, (1, 2, 3), "ring1"))
    for _ in range(3):
        step(w, A)
    assert w.agents[0].status == DEAD
    # died in round 1 and left its token behind at node 1
    assert w.tokens[1] >= 1


def test_lockstep_percepts_use_start_of_round_snapshot():
    A = get_automaton("ring1")
    w = new_world(ScenarioSpec(6, 0, (2, 3), "ring1"))
    rec = step(w, A)
    assert all(s.percept.tokens_here == 0 for s in rec.steps)


def test_run_example_ten_ring():
    t = run(new_world(ScenarioSpec(10, 0, (3, 6, 9), "ring1")), get_automaton("ring1"), 330)
    assert t.termination == QUIESCENT
    assert t.marked_links() == {(0, 1), (0, 9)}
    assert len(t.deaths) == 2


def test_run_without_agents_is_invalid():
    spec = ScenarioSpec(5, 0, (), "ring1")
    t = run(new_world(spec), get_automaton("ring1"), 10)
    assert t.termination == INVALID and t.rounds_used == 0


def test_run_rejects_zero_bound():
    with pytest.raises(ValueError):
        run(new_world(ScenarioSpec(5, 0, (1,), "ring1")), get_automaton("ring1"), 0)


def test_run_reaches_bound():
    A = _one_state(STAY)
    t = run(new_world(ScenarioSpec(5, 0, (1, 2), "ring1"), A), A, 3)
    # a frozen world repeats after one round
    assert t.termination == QUIESCENT and t.period == 1
    A = _one_state(Action(move=RIGHT))
    t = run(new_world(ScenarioSpec(40, 0, (1,), "ring1"), A), A, 5)
    assert t.termination == BOUND and t.rounds_used == 5


def test_extinction():
    A = _one_state(Action(move=LEFT))
    t = run(new_world(ScenarioSpec(5, 0, (1, 2), "ring1"), A), A, 20)
    assert t.termination == EXTINCT and len(t.deaths) == 2


def test_link_of_is_undirected():
    assert link_of(10, 0, CW) == (0, 9) == link_of(10, 9, CCW)


def _random_spec(seed):
    r = random.Random(seed)
    protocol = r.choice(["ring1", "ring2", "ring3"])
    n = r.randint(6, 14)
    k = r.randint(5 if protocol == "ring3" else 4, n - 1)
    hb = tuple(sorted(r.sample(range(1, n), k)))
    oriented = protocol == "ring2" or r.random() < .4
    lab = None if oriented else tuple(r.choice((1, 2)) for _ in range(n))
    return ScenarioSpec(n, 0, hb, protocol, oriented, lab)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**9))
def test_world_invariants(seed):
    spec = _random_spec(seed)
    A = get_automaton(spec.protocol)
    w = new_world(spec)
    total = w.budget * len(w.agents)
    marks = set()
    while w.live and w.round < spec.bound:
        rec = step(w, A)
        assert all(0 <= c <= 2 for c in w.tokens)
        assert w.tokens[w.black_hole] == 0
        assert marks <= w.marks
        marks = set(w.marks)
        for d in rec.deaths:
            assert (d.origin + d.direction) % w.n == w.black_hole
        assert all(a.location == w.black_hole for a in w.agents if a.status == DEAD)
        assert not any(a.location == w.black_hole for a in w.agents if a.status != DEAD)
        if w.movable:
            assert w.placed_tokens() + w.carried_tokens() + w.destroyed == total
        if rec.round > 3 * w.n + 10 and not w.live:
            break


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**9))
def test_runs_are_deterministic(seed):
    spec = _random_spec(seed)
    A = get_automaton(spec.protocol)
    assert dumps_trace(run(new_world(spec), A)) == dumps_trace(run(new_world(spec), A))
