import pytest

from bhsring.harness import enumerate_scenarios, theorem_scenario
from bhsring.scenario import ScenarioSpec
from bhsring.traceio import simulate
from bhsring.verifier import (FAILURE, MISSING_LINK, NO_SURVIVOR, PROTOCOL_FAULT, SUCCESS,
                              TIMEOUT, WRONG_LINK, Verdict, bh_links, check_properties,
                              judge, marks_follow_deaths, pairing_violations)
from bhsring.world import (BOUND, EXTINCT, FATAL, QUIESCENT, Death, RoundRecord, Switch,
                           Trace)


def fake(n=8, marks=(), deaths=(), status=("alive",), termination=QUIESCENT, rounds=10):
    """A trace with only what the verifier reads: marks, deaths, end state."""
    recs = []
    for r in range(1, rounds + 1):
        added = tuple((v, g) for rr, v, g in marks if rr == r)
        dead = tuple(d for d in deaths if d.round == r)
        recs.append(RoundRecord(r, (), (), added, dead))
    return Trace(None, n, 0, recs, termination, None, 0,
                 tuple(sorted((v, g) for _, v, g in marks)), tuple(status))


BOTH = ((5, 1, -1), (6, 7, 1))
TWO_DEATHS = (Death(2, 1, "X", 1, -1), Death(3, 2, "X", 7, 1))


def test_bh_links():
    assert bh_links(8, 0) == {(0, 1), (0, 7)}
    assert bh_links(8, 3) == {(2, 3), (3, 4)}


def test_success():
    v = judge(fake(marks=BOTH, deaths=TWO_DEATHS, status=("alive", "dead", "dead")))
    assert v.ok and v.outcome == SUCCESS and v.failure_reason is None
    assert v.marked_links == ((0, 1), (0, 7)) and v.dead_count == 2


def test_wrong_link_dominates():
    v = judge(fake(marks=BOTH + ((4, 4, -1),), status=("dead",), termination=BOUND))
    assert v.outcome == FAILURE and v.failure_reason == WRONG_LINK


@pytest.mark.parametrize("kw,reason", [
    (dict(marks=BOTH, termination=FATAL), PROTOCOL_FAULT),
    (dict(marks=BOTH, status=("dead",)), NO_SURVIVOR),
    (dict(marks=BOTH, termination=EXTINCT, status=()), NO_SURVIVOR),
    (dict(marks=BOTH, termination=BOUND), TIMEOUT),
    (dict(marks=BOTH[:1]), MISSING_LINK),
    (dict(), MISSING_LINK),
])
def test_failure_reasons(kw, reason):
    assert judge(fake(**kw)).failure_reason == reason


def test_judge_is_pure():
    t = simulate(ScenarioSpec(10, 0, (3, 6, 9), "ring1"))
    assert judge(t) == judge(t)
    assert Verdict.from_dict(judge(t).to_dict()) == judge(t)


@pytest.mark.parametrize("k,p", [(3, 2), (3, 1), (4, 3)])
def test_spaced_unmovable_ring_marks_far_link(k, p):
    # identical agents mark identical links one spacing apart, so at most one is right
    (spec,) = theorem_scenario("thm1", k=k, p=p)
    v = judge(simulate(spec))
    assert v.failure_reason == WRONG_LINK
    lows = sorted(a for a, _ in v.marked_links)
    assert any((b - a) % spec.n == 2 * (p + 1) for a in lows for b in lows)


def test_mark_without_death_detected():
    t = fake(marks=BOTH, deaths=TWO_DEATHS[:1])
    assert marks_follow_deaths(t) == ["link (0, 7) marked in round 6 with no earlier death "
                                      "through it"]
    late = fake(marks=BOTH, deaths=TWO_DEATHS + (Death(8, 3, "X", 1, -1),))
    assert any("after it was marked" in m for m in marks_follow_deaths(late))
    assert not marks_follow_deaths(fake(marks=BOTH, deaths=TWO_DEATHS))


def test_pairing_counts():
    def with_switches(sw):
        t = fake(rounds=3)
        t.switches = lambda: sw
        return t
    ok = [Switch(2, 4, 0, "WAITING", "LEADER.probe", True),
          Switch(2, 4, 1, "ALONE", "FOLLOWER.w1", True)]
    assert pairing_violations(with_switches(ok)) == []
    two = ok + [Switch(2, 4, 2, "WAITING", "LEADER.probe", True)]
    msgs = pairing_violations(with_switches(two))
    assert any("2 LEADERs created" in m for m in msgs)
    assert any("but 1 FOLLOWER" in m for m in msgs)
    assert pairing_violations(with_switches([])) == ["no LEADER was ever created"]


@pytest.mark.parametrize("protocol,n,k,oriented,lo,hi", [
    ("ring1", 8, 3, True, 2, 2),
    ("ring2", 8, 4, True, 1, 3),
    ("ring3", 7, 5, False, 2, 4),
])
def test_property_packs_on_real_runs(protocol, n, k, oriented, lo, hi):
    for spec in enumerate_scenarios(protocol, (n, n), (k, k), oriented=oriented):
        t = simulate(spec)
        assert judge(t).ok
        assert lo <= len(t.deaths) <= hi
        assert check_properties(t, protocol) == [], spec


def test_property_pack_flags_extra_deaths():
    t = fake(marks=BOTH, deaths=TWO_DEATHS + (Death(4, 3, "X", 1, -1),))
    assert "3 deaths, expected exactly 2" in check_properties(t, "ring1")
    assert any("after it was marked" not in m for m in check_properties(t, "ring1"))


def test_unknown_protocol_gets_generic_checks_only():
    t = fake(marks=BOTH, deaths=TWO_DEATHS)
    assert check_properties(t, "ring1-unmovable") == []
