import itertools
import random

import pytest

from bhsring.scenario import ScenarioSpec


def random_spec(rng: random.Random, protocol: str, n_lo: int, n_hi: int, k_min: int,
                oriented=None) -> ScenarioSpec:
    n = rng.randint(max(n_lo, k_min + 1), n_hi)
    k = rng.randint(k_min, n - 1)
    bh = rng.randrange(n)
    hb = tuple(sorted(rng.sample([v for v in range(n) if v != bh], k)))
    if oriented is None:
        oriented = rng.random() < 0.5
    lab = None if oriented else tuple(rng.choice((1, 2)) for _ in range(n))
    return ScenarioSpec(n, bh, hb, protocol, oriented, lab)


@pytest.fixture
def rng():
    return random.Random(20240611)


def all_labelings(n):
    return itertools.product((1, 2), repeat=n)
