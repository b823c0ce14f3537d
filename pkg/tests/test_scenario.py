import itertools
from math import comb

import pytest

from bhsring.harness import EXHAUSTIVE, Sampled, count_exhaustive, enumerate_scenarios
from bhsring.scenario import InvalidSpec, ScenarioSpec, default_bound


def test_default_bound():
    assert default_bound(10) == 330


@pytest.mark.parametrize("kwargs", [
    dict(n=2, black_hole=0, homebases=(1,)),
    dict(n=6, black_hole=0, homebases=(1, 1, 3)),
    dict(n=6, black_hole=3, homebases=(1, 3)),
    dict(n=6, black_hole=6, homebases=(1,)),
    dict(n=6, black_hole=0, homebases=(1, 7)),
    dict(n=4, black_hole=0, homebases=(1,), oriented=False),
    dict(n=4, black_hole=0, homebases=(1,), oriented=False, labeling=(1, 2, 3, 1)),
    dict(n=4, black_hole=0, homebases=(1,), round_bound=0),
])
def test_invalid(kwargs):
    with pytest.raises(InvalidSpec):
        ScenarioSpec(**kwargs).validate()


def test_ports_oriented_ignore_labeling():
    s = ScenarioSpec(4, 0, (1,), labeling=(2, 2, 2, 2))
    assert s.ports == (1, 1, 1, 1)


def test_rotation_moves_everything():
    s = ScenarioSpec(5, 1, (2, 4), oriented=False, labeling=(1, 2, 1, 1, 2))
    r = s.rotated(2)
    assert r.black_hole == 3 and r.homebases == (1, 4)
    # the node that was 2 (label 1) is now 4
    assert r.labeling[4] == s.labeling[2]


def test_reflection_is_an_involution():
    s = ScenarioSpec(7, 2, (0, 3, 5), oriented=False, labeling=(1, 2, 2, 1, 1, 2, 1))
    assert s.reflected().reflected() == s
    assert s.reflected().black_hole == 2


def test_reflection_flips_labels():
    # reflecting swaps which port is clockwise, so every label flips
    s = ScenarioSpec(4, 0, (1,), oriented=False, labeling=(1, 1, 1, 1))
    assert s.reflected().labeling == (2, 2, 2, 2)


def test_canonical_puts_hole_at_zero():
    s = ScenarioSpec(8, 5, (1, 6, 7))
    c = s.canonical()
    assert c.black_hole == 0 and c.homebases == (1, 2, 4)


def test_dict_round_trip():
    s = ScenarioSpec(6, 0, (1, 4), "ring3", False, (1, 2, 1, 2, 1, 2), 99, 1, False)
    assert ScenarioSpec.from_dict(s.to_dict()) == s


def test_effective_key_ignores_labels_off_homebases():
    a = ScenarioSpec(5, 0, (1, 3), oriented=False, labeling=(1, 1, 2, 1, 1))
    b = ScenarioSpec(5, 0, (1, 3), oriented=False, labeling=(2, 1, 1, 1, 2))
    c = ScenarioSpec(5, 0, (1, 3), oriented=False, labeling=(1, 2, 1, 1, 1))
    assert a.effective_key() == b.effective_key()
    assert a.effective_key() != c.effective_key()


def test_oriented_count_n5_k3():
    got = list(enumerate_scenarios("ring1", (5, 5), (3, 3)))
    assert len(got) == comb(4, 3) == 4
    assert all(s.black_hole == 0 for s in got)


def test_unoriented_count_matches_brute_force():
    got = set(enumerate_scenarios("ring1", (5, 5), (3, 3), oriented=False))
    brute = set()
    for bh in range(5):
        for hb in itertools.combinations([v for v in range(5) if v != bh], 3):
            for lab in itertools.product((1, 2), repeat=5):
                brute.add(ScenarioSpec(5, bh, hb, "ring1", False, lab).canonical())
    assert got == brute
    # reflection pairs up all but the self-mirrored ones
    assert 4 * 32 / 2 <= len(got) < 4 * 32


def test_count_estimate_is_an_upper_bound():
    got = sum(1 for _ in enumerate_scenarios("ring1", (4, 6), (3, 5), oriented=False))
    assert got <= count_exhaustive((4, 6), (3, 5), False)
    assert count_exhaustive((4, 6), (3, 5), True) == \
        sum(1 for _ in enumerate_scenarios("ring1", (4, 6), (3, 5)))


def test_k_is_clipped_to_n_minus_1():
    got = list(enumerate_scenarios("ring1", (4, 4), (3, 10)))
    assert {s.k for s in got} == {3}


def test_sampled_is_seed_deterministic():
    a = list(enumerate_scenarios("ring3", (12, 13), (5, 99), Sampled(7, 10, 10),
                                 oriented=False))
    b = list(enumerate_scenarios("ring3", (12, 13), (5, 99), Sampled(7, 10, 10),
                                 oriented=False))
    c = list(enumerate_scenarios("ring3", (12, 13), (5, 99), Sampled(8, 10, 10),
                                 oriented=False))
    assert a == b and a != c
    assert len(set(a)) == len(a) <= 200
    assert all(s == s.canonical() for s in a)


def test_unknown_mode():
    with pytest.raises(ValueError):
        list(enumerate_scenarios("ring1", (4, 4), (3, 3), "bogus"))


def test_exhaustive_cap_warns(caplog):
    gen = enumerate_scenarios("ring1", (4, 5), (3, 4), EXHAUSTIVE, cap=3)
    next(gen)
    assert "exceeds cap" in caplog.text
