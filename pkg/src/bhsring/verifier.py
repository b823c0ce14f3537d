"""Judging traces: the black-hole-search success criterion and the
per-protocol execution properties.

Everything here reads a run through a small interface (``n``,
``black_hole``, ``termination``, ``rounds_used``, ``deaths``,
``marked_links()``, ``survivors()``, ``switches()``, ``mark_events()``), which
both full traces and the compact summaries of the fast engine provide.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from .agent import family, substate
from .world import BOUND, EXTINCT, FATAL, INVALID, QUIESCENT, Trace, link_of

SUCCESS = "success"
FAILURE = "failure"

WRONG_LINK = "wrong-link-marked"
MISSING_LINK = "missing-link-mark"
NO_SURVIVOR = "no-survivor"
TIMEOUT = "timeout"
PROTOCOL_FAULT = "protocol-fault"

REASONS = (WRONG_LINK, MISSING_LINK, NO_SURVIVOR, TIMEOUT, PROTOCOL_FAULT)


@dataclass(frozen=True)
class Verdict:
    outcome: str
    failure_reason: str | None
    dead_count: int
    rounds_used: int
    marked_links: tuple

    @property
    def ok(self) -> bool:
        return self.outcome == SUCCESS

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "failure_reason": self.failure_reason,
            "dead_count": self.dead_count,
            "rounds_used": self.rounds_used,
            "marked_links": [list(x) for x in self.marked_links],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Verdict":
        return cls(d["outcome"], d["failure_reason"], d["dead_count"], d["rounds_used"],
                   tuple(tuple(x) for x in d["marked_links"]))


def bh_links(n: int, bh: int) -> frozenset:
    return frozenset({link_of(n, bh, 1), link_of(n, bh, -1)})


def judge(trace: Trace) -> Verdict:
    """Success iff exactly the two black-hole links are marked, somebody
    survives, and the run came to rest before the round bound."""
    marks = trace.marked_links()
    expected = bh_links(trace.n, trace.black_hole)
    dead = len(trace.deaths)
    if marks - expected:
        reason = WRONG_LINK
    elif trace.termination == FATAL:
        reason = PROTOCOL_FAULT
    elif trace.termination in (EXTINCT, INVALID) or trace.survivors() == 0:
        reason = NO_SURVIVOR
    elif trace.termination == BOUND:
        reason = TIMEOUT
    elif expected - marks:
        reason = MISSING_LINK
    elif trace.termination != QUIESCENT:
        reason = TIMEOUT
    else:
        reason = None
    return Verdict(SUCCESS if reason is None else FAILURE, reason, dead,
                   trace.rounds_used, tuple(sorted(marks)))


# ---------------------------------------------------------------- properties

def _mark_rounds(trace: Trace) -> dict:
    first = {}
    for r, v, g in trace.mark_events():
        first.setdefault(link_of(trace.n, v, g), r)
    return first


def marks_follow_deaths(trace: Trace) -> list:
    """Every marked link was entered earlier by an agent that died crossing it,
    and nobody dies through a link after it was marked."""
    out = []
    died = defaultdict(list)
    for d in trace.deaths:
        died[d.link(trace.n)].append(d.round)
    for link, r in sorted(_mark_rounds(trace).items()):
        if not any(dr < r for dr in died.get(link, ())):
            out.append(f"link {link} marked in round {r} with no earlier death through it")
        if any(dr > r for dr in died.get(link, ())):
            out.append(f"agent died through link {link} after it was marked")
    return out


def _entries(trace: Trace, fam: str, skip: tuple = ()) -> list:
    """(round, node, agent, left_cw) for every switch into family ``fam``."""
    return [(w.round, w.at, w.agent, w.left_cw) for w in trace.switches()
            if family(w.after) == fam and substate(w.after) not in skip]


def pairing_violations(trace: Trace) -> list:
    out = []
    leaders = defaultdict(int)
    followers = defaultdict(int)
    for r, v, _, _ in _entries(trace, "LEADER"):
        leaders[(r, v)] += 1
    # a follower that starts out idle met a leader who retired on the spot
    for r, v, _, _ in _entries(trace, "FOLLOWER", skip=("idle",)):
        followers[(r, v)] += 1
    for key in sorted(set(leaders) | set(followers)):
        lc, fc = leaders[key], followers[key]
        if lc > 1:
            out.append(f"{lc} LEADERs created at node {key[1]} in round {key[0]}")
        if lc != fc:
            out.append(f"{lc} LEADER(s) but {fc} FOLLOWER(s) paired at node {key[1]} "
                       f"in round {key[0]}")
    if not leaders and trace.rounds_used:
        out.append("no LEADER was ever created")
    return out


def _ring1(trace: Trace) -> list:
    d = len(trace.deaths)
    return [] if d == 2 else [f"{d} deaths, expected exactly 2"]


def _ring2(trace: Trace) -> list:
    out = []
    deaths = trace.deaths
    fams = [family(d.state) for d in deaths]
    cl = fams.count("CHECK-LEFT")
    if cl != 1:
        out.append(f"{cl} CHECK-LEFT deaths, expected exactly 1")
    if not 1 <= len(deaths) <= 3:
        out.append(f"{len(deaths)} deaths, expected 1..3")
    for d, f in zip(deaths, fams):
        if f not in ("CHECK-LEFT", "LEADER", "RIGHT-LEADER"):
            out.append(f"agent {d.agent} died in state {d.state}")
    rl = {a for _, _, a, _ in _entries(trace, "RIGHT-LEADER")}
    if len(rl) != 1:
        out.append(f"{len(rl)} RIGHT-LEADERs, expected exactly 1")
    by_round = defaultdict(int)
    for d, f in zip(deaths, fams):
        if f == "LEADER":
            by_round[d.round] += 1
    if any(c > 1 for c in by_round.values()):
        out.append("two LEADERs entered the black hole in the same round")
    out += pairing_violations(trace)
    return out


def _ring3(trace: Trace) -> list:
    out = []
    deaths = trace.deaths
    early = [d for d in deaths if d.carried >= 1]
    if len(early) != 2:
        out.append(f"{len(early)} deaths before the second token, expected exactly 2")
    if not 2 <= len(deaths) <= 4:
        out.append(f"{len(deaths)} deaths, expected 2..4")
    rl = {}
    for _, _, a, lcw in _entries(trace, "RIGHT-LEADER"):
        rl.setdefault(a, lcw)
    if not 1 <= len(rl) <= 2:
        out.append(f"{len(rl)} RIGHT-LEADERs, expected 1 or 2")
    elif len(rl) == 2 and len(set(rl.values())) != 2:
        out.append("two RIGHT-LEADERs with the same orientation")
    per_dir = defaultdict(int)
    for d in deaths:
        if family(d.state) in ("LEADER", "RIGHT-LEADER"):
            per_dir[d.direction] += 1
    if any(c > 1 for c in per_dir.values()):
        out.append("two LEADER/RIGHT-LEADER agents entered the black hole from one side")
    out += pairing_violations(trace)
    return out


PACKS = {"ring1": _ring1, "ring2": _ring2, "ring3": _ring3}


def check_properties(trace: Trace, protocol) -> list:
    """All property violations of ``trace`` under ``protocol``; empty means clean.

    The mark/death check applies to every protocol; the rest only to the
    three shipped ones.
    """
    name = getattr(protocol, "value", protocol)
    out = marks_follow_deaths(trace)
    pack = PACKS.get(name)
    if pack is not None:
        out += pack(trace)
    return out
