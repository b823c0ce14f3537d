import random

import pytest
from hypothesis import given, settings, strategies as st

from bhsring import fastsim
from bhsring.harness import enumerate_scenarios, theorem_scenario
from bhsring.protocols import get_automaton
from bhsring.scenario import ScenarioSpec
from bhsring.traceio import simulate
from bhsring.verifier import check_properties, judge

pytestmark = pytest.mark.skipif(not fastsim.AVAILABLE, reason="numba not importable")


def summary(t, protocol):
    return (judge(t), tuple(check_properties(t, protocol)), t.termination, t.period,
            t.rounds_used, tuple(t.deaths), t.marked_links(), tuple(t.final_status),
            tuple(sorted(t.switches(), key=repr)), tuple(sorted(t.mark_events())))


def same(spec, bound=None):
    A = get_automaton(spec.protocol)
    ref = simulate(spec, bound)
    fast = fastsim.run_fast(spec, A, bound)
    assert summary(ref, spec.protocol) == summary(fast, spec.protocol), spec


@pytest.mark.parametrize("protocol,n,k,oriented", [
    ("ring1", 7, 3, True), ("ring1", 6, 3, False), ("ring2", 8, 4, True),
    ("ring3", 7, 5, False)])
def test_engines_agree_exhaustively(protocol, n, k, oriented):
    for spec in enumerate_scenarios(protocol, (n, n), (k, n - 1), oriented=oriented):
        same(spec)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["ring1", "ring2", "ring3"]), st.integers(0, 10**9))
def test_engines_agree_on_random_specs(protocol, seed):
    r = random.Random(seed)
    n = r.randint(5, 18)
    k = r.randint(2, n - 1)
    bh = r.randrange(n)
    hb = tuple(sorted(r.sample([v for v in range(n) if v != bh], k)))
    oriented = r.random() < 0.5
    lab = None if oriented else tuple(r.choice((1, 2)) for _ in range(n))
    same(ScenarioSpec(n, bh, hb, protocol, oriented, lab))


def test_engines_agree_on_restricted_variants():
    for name in ("thm1", "thm1-r2"):
        for spec in theorem_scenario(name, k=3, p=2):
            same(spec)
    for spec in theorem_scenario("thm4", t=1, x=2)[:4]:
        same(spec)
    same(ScenarioSpec(9, 0, (2, 5), "ring1", tokens=2))


def test_engines_agree_on_faults_and_bounds():
    # one movable token but an unmovable budget makes cautious walk fault
    same(ScenarioSpec(8, 0, (2, 5, 7), "ring1", movable=False))
    same(ScenarioSpec(20, 0, (3, 9, 15), "ring1"), bound=7)


def test_compiled_cache_is_shared():
    A = get_automaton("ring2")
    assert fastsim.compiled(A) is fastsim.compiled(A)
