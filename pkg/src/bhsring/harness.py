"""Scenario generation, sweeps, adversary search and the lower-bound
constructions."""

from __future__ import annotations

import itertools
import json
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from . import fastsim
from .protocols import get_automaton
from .scenario import InvalidSpec, ScenarioSpec, default_bound
from .verifier import Verdict, check_properties, judge
from .world import new_world, run

log = logging.getLogger(__name__)

EXHAUSTIVE_CAP = 2_000_000


# ---------------------------------------------------------------- enumeration

@dataclass(frozen=True)
class Sampled:
    seed: int
    labelings: int = 256
    placements: int = 256


EXHAUSTIVE = "exhaustive"


def _placements(n: int, k: int) -> Iterator[tuple]:
    return itertools.combinations(range(1, n), k)


def _k_values(n: int, k_range) -> list:
    lo, hi = k_range
    return [k for k in range(lo, min(hi, n - 1) + 1)]


def count_exhaustive(n_range, k_range, oriented: bool) -> int:
    from math import comb
    total = 0
    for n in range(n_range[0], n_range[1] + 1):
        per = sum(comb(n - 1, k) for k in _k_values(n, k_range))
        total += per if oriented else per * 2 ** (n - 1)
    return total


def enumerate_scenarios(protocol: str, n_range, k_range, mode=EXHAUSTIVE, *,
                        oriented: bool = True, round_bound: Optional[int] = None,
                        tokens: Optional[int] = None, movable: Optional[bool] = None,
                        cap: int = EXHAUSTIVE_CAP) -> Iterator[ScenarioSpec]:
    """Canonical, duplicate-free scenarios with the black hole at node 0.

    ``n_range``/``k_range`` are inclusive pairs; k is clipped to n-1.
    Exhaustive unoriented mode yields every labeling up to reflection.
    ``Sampled(seed, labelings, placements)`` draws, per n, that many
    placements and labelings and yields their product (deduplicated).
    """
    extra = dict(protocol=protocol, oriented=oriented, round_bound=round_bound,
                 tokens=tokens, movable=movable)
    if mode == EXHAUSTIVE:
        est = count_exhaustive(n_range, k_range, oriented)
        if est > cap:
            log.warning("exhaustive enumeration of about %d scenarios exceeds cap %d",
                        est, cap)
        for n in range(n_range[0], n_range[1] + 1):
            for k in _k_values(n, k_range):
                for hb in _placements(n, k):
                    if oriented:
                        yield ScenarioSpec(n, 0, hb, **extra)
                        continue
                    for lab in itertools.product((1, 2), repeat=n):
                        s = ScenarioSpec(n, 0, hb, labeling=lab, **extra)
                        if s.canonical() == s:
                            yield s
        return
    if not isinstance(mode, Sampled):
        raise ValueError(f"unknown labeling mode {mode!r}")
    for n in range(n_range[0], n_range[1] + 1):
        ks = _k_values(n, k_range)
        if not ks:
            continue
        rng = random.Random(f"{mode.seed}:{n}")
        placements = []
        for _ in range(mode.placements):
            k = rng.choice(ks)
            placements.append(tuple(sorted(rng.sample(range(1, n), k))))
        labelings = [None] if oriented else [
            tuple(rng.choice((1, 2)) for _ in range(n)) for _ in range(mode.labelings)]
        seen = set()
        for hb in placements:
            for lab in labelings:
                s = ScenarioSpec(n, 0, hb, labeling=lab, **extra)
                if not oriented:
                    s = s.canonical()
                if s not in seen:
                    seen.add(s)
                    yield s


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class Outcome:
    """What a sweep keeps from one run."""

    verdict: Verdict
    violations: tuple

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.to_dict(), "violations": list(self.violations)}


ENGINES = ("auto", "python", "fast")


def evaluate(spec: ScenarioSpec, engine: str = "auto") -> Outcome:
    """Run one scenario and judge it.

    ``engine`` picks the reference Python engine, the compiled one, or
    (``auto``) the compiled one whenever numba is importable.  Both give
    the same outcome.
    """
    automaton = get_automaton(spec.protocol)
    if engine == "auto":
        engine = "fast" if fastsim.AVAILABLE else "python"
    if engine == "fast":
        trace = fastsim.run_fast(spec, automaton)
    elif engine == "python":
        trace = run(new_world(spec), automaton, spec.bound)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return Outcome(judge(trace), tuple(check_properties(trace, spec.protocol)))


def _evaluate_keyed(job):
    spec, engine = job
    return spec.effective_key(), evaluate(spec, engine)


@dataclass
class SweepReport:
    protocol: str
    scenarios: int = 0
    runs: int = 0
    verdicts: Counter = field(default_factory=Counter)
    reasons: Counter = field(default_factory=Counter)
    violations: Counter = field(default_factory=Counter)
    deaths: Counter = field(default_factory=Counter)
    max_rounds: dict = field(default_factory=dict)  # n -> max rounds used
    exemplars: list = field(default_factory=list)  # (spec, verdict) failures
    violating: list = field(default_factory=list)  # specs with property violations
    exemplar_cap: int = 20

    @property
    def failures(self) -> int:
        return self.scenarios - self.verdicts.get("success", 0)

    @property
    def ok(self) -> bool:
        return self.failures == 0 and not self.violations

    def add(self, spec: ScenarioSpec, out: Outcome) -> None:
        v = out.verdict
        self.scenarios += 1
        self.verdicts[v.outcome] += 1
        if v.failure_reason:
            self.reasons[v.failure_reason] += 1
        self.deaths[v.dead_count] += 1
        if v.outcome == "success":
            self.max_rounds[spec.n] = max(self.max_rounds.get(spec.n, 0), v.rounds_used)
        elif len(self.exemplars) < self.exemplar_cap:
            self.exemplars.append((spec, v))
        for msg in out.violations:
            self.violations[_violation_kind(msg)] += 1
        if out.violations and len(self.violating) < self.exemplar_cap:
            self.violating.append((spec, out.violations))

    def slope(self) -> Optional[float]:
        """Least-squares slope of max rounds against n."""
        pts = sorted(self.max_rounds.items())
        if len(pts) < 2:
            return None
        mx = sum(n for n, _ in pts) / len(pts)
        my = sum(r for _, r in pts) / len(pts)
        sxx = sum((n - mx) ** 2 for n, _ in pts)
        return sum((n - mx) * (r - my) for n, r in pts) / sxx

    def within_bound(self) -> bool:
        return all(r <= default_bound(n) for n, r in self.max_rounds.items())

    def to_dict(self) -> dict:
        slope = self.slope()
        return {
            "protocol": self.protocol,
            "scenarios": self.scenarios,
            "runs": self.runs,
            "verdicts": dict(sorted(self.verdicts.items())),
            "failure_reasons": dict(sorted(self.reasons.items())),
            "deaths": {str(k): v for k, v in sorted(self.deaths.items())},
            "property_violations": dict(sorted(self.violations.items())),
            "max_rounds": {str(n): r for n, r in sorted(self.max_rounds.items())},
            "round_slope": None if slope is None else round(slope, 6),
            "within_bound": self.within_bound(),
            "exemplars": [{"spec": s.to_dict(), "verdict": v.to_dict()}
                          for s, v in self.exemplars],
            "violating": [{"spec": s.to_dict(), "violations": list(m)}
                          for s, m in self.violating],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _violation_kind(msg: str) -> str:
    # strip the numbers so the tally groups like with like
    return " ".join("#" if w.strip(",()").isdigit() else w for w in msg.split())


def sweep(protocol: str, scenarios: Iterable[ScenarioSpec], jobs: int = 1,
          exemplar_cap: int = 20, engine: str = "auto",
          batch: int = 8192) -> SweepReport:
    """Run and judge every scenario.

    Runs are shared between scenarios with the same effective key (they are
    indistinguishable to the agents).  Scenarios are consumed in batches and
    results are folded in input order, so the report does not depend on
    ``jobs``.  The run cache is dropped whenever the ring size changes, which
    keeps memory flat on long sampled sweeps.
    """
    report = SweepReport(protocol, exemplar_cap=exemplar_cap)
    results: dict = {}
    pool = None
    if jobs > 1:
        import multiprocessing as mp
        pool = mp.get_context("fork").Pool(jobs)
    last_n = None
    try:
        it = iter(scenarios)
        while True:
            chunk = list(itertools.islice(it, batch))
            if not chunk:
                break
            keyed = []
            todo = {}
            for spec in chunk:
                if spec.n != last_n:
                    results.clear()
                    last_n = spec.n
                key = spec.effective_key()
                keyed.append((spec, key, results.get(key)))
                if key not in results:
                    todo.setdefault(key, spec)
            jobs_list = [(s, engine) for s in todo.values()]
            if pool is not None and len(jobs_list) > 1:
                done = dict(pool.imap_unordered(_evaluate_keyed, jobs_list, chunksize=64))
            else:
                done = dict(map(_evaluate_keyed, jobs_list))
            report.runs += len(done)
            for spec, key, out in keyed:
                report.add(spec, out if out is not None else done[key])
            results.update(done)
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    return report


# ---------------------------------------------------------------- adversary

def adversary_search(automaton: str, k: int, token_budget: Optional[int] = None,
                     movable: Optional[bool] = None, n_max: int = 20, *,
                     oriented: Optional[bool] = None, n_min: Optional[int] = None,
                     round_bound: Optional[int] = None) -> Optional[ScenarioSpec]:
    """First failing scenario in (n, placement, labeling) order, or None.

    Unoriented search (the default when the automaton does not require an
    oriented ring) walks labelings after the oriented one.
    """
    info = get_automaton(automaton).info
    if n_max < k + 1:
        raise ValueError("n_max must be at least k + 1")
    if oriented is None:
        oriented = info.needs_orientation
    for n in range(max(3, k + 1, n_min or 0), n_max + 1):
        for hb in _placements(n, k):
            labelings = [None] if oriented else itertools.product((1, 2), repeat=n)
            tried = set()
            for lab in labelings:
                s = ScenarioSpec(n, 0, hb, automaton, oriented=lab is None, labeling=lab,
                                 round_bound=round_bound, tokens=token_budget,
                                 movable=movable)
                key = s.effective_key()[:5]
                if key in tried:
                    continue
                tried.add(key)
                if not evaluate(s).verdict.ok:
                    return s
    return None


# ---------------------------------------------------------------- constructions

THEOREMS = ("thm1", "thm1-r2", "thm3", "thm4")


def theorem_scenario(theorem_id: str, **params) -> list:
    """Scenario family of a lower-bound construction (black hole at node 0).

    thm1    k, p: ring of 2k(p+1) nodes, agents 2(p+1) apart, the black hole
            midway between two of them.
    thm1-r2 k, p: same spacing with k+1 agents on 2(k+1)(p+1) nodes.
    thm3    t, x, y: three agents 4t apart on 8t+x+y nodes, the black hole
            x and y away from the two outer ones (1 <= x, y <= 2t).
    thm4    t, x: four agents 4t+1 apart, the black hole x away from the two
            outer ones; one scenario per mirror-symmetric orientation choice
            first, then the remaining ones.
    """
    protocol = params.pop("protocol", None)
    bound = params.pop("round_bound", None)
    tokens = params.pop("tokens", None)
    movable = params.pop("movable", None)

    def mk(n, hb, oriented=True, lab=None, default="ring1"):
        return ScenarioSpec(n, 0, tuple(sorted(hb)), protocol or default, oriented, lab,
                            bound, tokens, movable)

    if theorem_id in ("thm1", "thm1-r2"):
        k, p = _need(params, "k", "p")
        if k < 1 or p < 0:
            raise InvalidSpec("thm1 needs k >= 1 and p >= 0")
        m = k if theorem_id == "thm1" else k + 1
        gap = 2 * (p + 1)
        n = m * gap
        return [mk(n, [(p + 1) + gap * i for i in range(m)], default="ring1-unmovable")]
    if theorem_id == "thm3":
        t, x, y = _need(params, "t", "x", "y")
        if t < 1 or not (1 <= x <= 2 * t and 1 <= y <= 2 * t):
            raise InvalidSpec("thm3 needs t >= 1 and 1 <= x, y <= 2t")
        n = 8 * t + x + y
        return [mk(n, [x, x + 4 * t, x + 8 * t], default="ring2")]
    if theorem_id == "thm4":
        t, x = _need(params, "t", "x")
        if t < 1 or x < 1:
            raise InvalidSpec("thm4 needs t >= 1 and x >= 1")
        gap = 4 * t + 1
        n = 3 * gap + 2 * x
        hb = [x + i * gap for i in range(4)]
        out = []
        orients = list(itertools.product((1, 2), repeat=4))
        mirror = [o for o in orients if all(o[i] != o[3 - i] for i in range(2))]
        rest = [o for o in orients if o not in mirror]
        for o in mirror + rest:
            lab = [1] * n
            for h, port in zip(hb, o):
                lab[h] = port
            out.append(mk(n, hb, oriented=False, lab=tuple(lab), default="ring3"))
        return out
    raise InvalidSpec(f"unknown theorem {theorem_id!r}; choose from {THEOREMS}")


def _need(params: dict, *names) -> list:
    missing = [k for k in names if k not in params]
    if missing:
        raise InvalidSpec(f"missing parameter(s) {', '.join(missing)}")
    extra = set(params) - set(names)
    if extra:
        raise InvalidSpec(f"unexpected parameter(s) {', '.join(sorted(extra))}")
    return [int(params[k]) for k in names]
