"""The ring world and its synchronous round engine.

Every round all live agents Look at the same start-of-round snapshot,
Compute their next state, then Move simultaneously.  Inside the Move stage an
agent first flips orientation (if asked), then puts or picks a token, then
marks a link or moves.  Agents that step onto the black hole die at the end
of the round, together with the tokens they carry.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .agent import (FAULT, Action, Automaton, Percept, build_percept, decide, family,
                    fix_orientation, global_dir)
from .scenario import InvalidSpec, ScenarioSpec

log = logging.getLogger(__name__)

ALIVE = "alive"
DEAD = "dead"
HALTED = "halted"


class SimulationError(RuntimeError):
    """A protocol asked the world for something the model forbids."""


class TokenConflict(SimulationError):
    pass


class MarkedLinkTraversal(SimulationError):
    pass


class ProtocolFault(SimulationError):
    pass


@dataclass
class AgentInstance:
    id: int
    home: int
    location: int
    state: str
    carried: int
    left_cw: bool = True
    status: str = ALIVE
    arrived: int = 0  # global direction of the move that brought it here

    @property
    def arrival_direction(self) -> Optional[str]:
        from .agent import side_of
        return None if not self.arrived else side_of(-self.arrived, self.left_cw)

    def key(self) -> tuple:
        return (self.status, self.location, self.state, self.carried,
                self.left_cw, self.arrived)


@dataclass
class RingWorld:
    n: int
    black_hole: int
    cw_port: tuple
    oriented: bool
    tokens: list
    agents: list
    budget: int
    movable: bool
    marks: set = field(default_factory=set)
    round: int = 0
    destroyed: int = 0
    spec: Optional[ScenarioSpec] = None

    def link_marked(self, v: int, g: int) -> bool:
        return (v, g) in self.marks or ((v + g) % self.n, -g) in self.marks

    def marked_links(self) -> frozenset:
        return frozenset(link_of(self.n, v, g) for v, g in self.marks)

    @property
    def live(self) -> list:
        return [a for a in self.agents if a.status == ALIVE]

    def config(self) -> tuple:
        return (tuple(a.key() for a in self.agents), tuple(self.tokens),
                frozenset(self.marks))

    def placed_tokens(self) -> int:
        return sum(self.tokens)

    def carried_tokens(self) -> int:
        return sum(a.carried for a in self.agents if a.status != DEAD)


def link_of(n: int, v: int, g: int) -> tuple:
    """Undirected link id: the sorted pair of its endpoints."""
    w = (v + g) % n
    return (v, w) if v < w else (w, v)


@dataclass(frozen=True)
class AgentStep:
    agent: int
    at: int  # node where it looked
    before: str
    percept: Percept
    action: Action
    after: str
    location: int
    status: str
    left_cw: bool

    def to_dict(self) -> dict:
        return {"agent": self.agent, "at": self.at, "before": self.before,
                "percept": self.percept.to_dict(), "action": self.action.to_dict(),
                "after": self.after, "location": self.location,
                "status": self.status, "left_cw": self.left_cw}

    @classmethod
    def from_dict(cls, d: dict) -> "AgentStep":
        return cls(d["agent"], d["at"], d["before"], Percept.from_dict(d["percept"]),
                   Action.from_dict(d["action"]), d["after"], d["location"],
                   d["status"], d["left_cw"])


@dataclass(frozen=True)
class Death:
    round: int
    agent: int
    state: str  # state whose action carried it in
    origin: int
    direction: int
    carried: int = 0  # tokens lost with it

    def link(self, n: int) -> tuple:
        return link_of(n, self.origin, self.direction)


@dataclass(frozen=True)
class RoundRecord:
    round: int
    steps: tuple
    token_deltas: tuple  # ((node, delta), ...)
    marks_added: tuple  # ((node, global_dir), ...)
    deaths: tuple = ()

    def to_dict(self) -> dict:
        return {
            "type": "round",
            "round": self.round,
            "steps": [s.to_dict() for s in self.steps],
            "token_deltas": [list(t) for t in self.token_deltas],
            "marks_added": [list(m) for m in self.marks_added],
            "deaths": [[d.agent, d.state, d.origin, d.direction, d.carried]
                       for d in self.deaths],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoundRecord":
        r = d["round"]
        return cls(
            r,
            tuple(AgentStep.from_dict(s) for s in d["steps"]),
            tuple(tuple(t) for t in d["token_deltas"]),
            tuple(tuple(m) for m in d["marks_added"]),
            tuple(Death(r, *x) for x in d["deaths"]),
        )


# termination reasons
QUIESCENT = "quiescent"
EXTINCT = "extinct"
BOUND = "bound"
FATAL = "fault"
INVALID = "invalid"


@dataclass(frozen=True)
class Switch:
    """An agent moving from one protocol state family to another."""

    round: int
    at: int
    agent: int
    before: str
    after: str
    left_cw: bool


@dataclass
class Trace:
    """A complete run: the scenario, every round, and why it stopped."""

    spec: Optional[ScenarioSpec]
    n: int
    black_hole: int
    rounds: list = field(default_factory=list)
    termination: str = ""
    fault: Optional[str] = None
    period: int = 0
    final_marks: tuple = ()
    final_status: tuple = ()
    token_total: int = 0

    @property
    def rounds_used(self) -> int:
        return len(self.rounds)

    @property
    def deaths(self) -> list:
        return [d for r in self.rounds for d in r.deaths]

    def marked_links(self) -> frozenset:
        return frozenset(link_of(self.n, v, g) for v, g in self.final_marks)

    def survivors(self) -> int:
        return sum(1 for s in self.final_status if s != DEAD)

    def switches(self) -> list:
        return [Switch(rec.round, s.at, s.agent, s.before, s.after, s.left_cw)
                for rec in self.rounds for s in rec.steps
                if family(s.before) != family(s.after)]

    def mark_events(self) -> list:
        """``(round, node, global_dir)`` for every mark placed."""
        return [(rec.round, v, g) for rec in self.rounds for v, g in rec.marks_added]


def new_world(spec: ScenarioSpec, automaton: Optional[Automaton] = None) -> RingWorld:
    """Round-0 world: every agent at its homebase, full budget, nothing placed."""
    from .protocols import get_automaton

    spec.validate()
    if len(spec.homebases) > spec.n - 1:
        raise InvalidSpec("more agents than safe nodes")
    if automaton is None:
        automaton = get_automaton(spec.protocol)
    info = automaton.info
    budget = info.tokens if spec.tokens is None else spec.tokens
    movable = info.movable if spec.movable is None else spec.movable
    if not 0 <= budget <= 2:
        raise InvalidSpec("token budget must be 0, 1 or 2")
    world = RingWorld(
        n=spec.n,
        black_hole=spec.black_hole,
        cw_port=spec.ports,
        oriented=spec.oriented,
        tokens=[0] * spec.n,
        agents=[],
        budget=budget,
        movable=movable,
        spec=spec,
    )
    for i, h in enumerate(spec.homebases):
        a = AgentInstance(id=i, home=h, location=h, state=automaton.initial, carried=budget)
        a.left_cw = fix_orientation(a, world)
        world.agents.append(a)
    return world


def step(world: RingWorld, automaton: Automaton) -> RoundRecord:
    """Advance the world by one synchronous round."""
    active = [a for a in world.agents if a.status == ALIVE]
    if not active:
        raise SimulationError("no live agent to step")
    n = world.n

    # Look + Compute against the untouched snapshot
    by_node = defaultdict(list)
    for a in world.agents:
        if a.status != DEAD:
            by_node[a.location].append(a)
    plans = []
    for a in active:
        companions = [b for b in by_node[a.location] if b is not a]
        p = build_percept(world, a, companions)
        nxt, act = decide(automaton, a.state, p)
        plans.append((a, a.state, a.location, p, nxt, act))

    # Move stage: validate against the snapshot, then apply
    puts = defaultdict(int)
    picks = defaultdict(int)
    for a, _, _, p, nxt, act in plans:
        if act.token_op == "put":
            if a.carried < 1:
                raise TokenConflict(f"agent {a.id} in {nxt} puts without a token")
            puts[a.location] += 1
        elif act.token_op == "pick":
            if not world.movable:
                raise TokenConflict(f"agent {a.id} picks an unmovable token")
            if a.carried >= world.budget:
                raise TokenConflict(f"agent {a.id} would exceed its token budget")
            picks[a.location] += 1
    for v, k in picks.items():
        if k > world.tokens[v]:
            raise TokenConflict(f"{k} picks at node {v} holding {world.tokens[v]}")
    deltas = {}
    for v in set(puts) | set(picks):
        d = puts[v] - picks[v]
        if world.tokens[v] + d > 2:
            raise TokenConflict(f"node {v} would hold {world.tokens[v] + d} tokens")
        if d:
            deltas[v] = d

    moves = []
    new_marks = []
    for a, _, _, p, nxt, act in plans:
        if act.flip:
            a.left_cw = not a.left_cw
        if act.mark:
            new_marks.append((a.location, global_dir(act.mark, a.left_cw)))
        if act.move:
            g = global_dir(act.move, a.left_cw)
            if world.link_marked(a.location, g):
                raise MarkedLinkTraversal(
                    f"agent {a.id} in {nxt} crosses marked link at {a.location}")
            moves.append((a, g))

    for v, d in deltas.items():
        world.tokens[v] += d
    for a, _, _, p, nxt, act in plans:
        if act.token_op == "put":
            a.carried -= 1
        elif act.token_op == "pick":
            a.carried += 1
        a.state = nxt
        if act.halt:
            a.status = HALTED
        if not act.move:
            a.arrived = 0
    added = tuple(m for m in dict.fromkeys(new_marks) if m not in world.marks)
    world.marks.update(added)

    world.round += 1
    deaths = []
    for a, g in moves:
        origin = a.location
        a.location = (origin + g) % n
        a.arrived = g
        if a.location == world.black_hole:
            a.status = DEAD
            world.destroyed += a.carried
            deaths.append(Death(world.round, a.id, a.state, origin, g, a.carried))
            a.carried = 0

    steps = tuple(
        AgentStep(a.id, at, before, p, act, a.state, a.location, a.status, a.left_cw)
        for a, before, at, p, _, act in plans
    )
    return RoundRecord(world.round, steps, tuple(sorted(deltas.items())),
                       tuple(sorted(added)), tuple(deaths))


def run(world: RingWorld, automaton: Automaton, round_bound: Optional[int] = None) -> Trace:
    """Step until quiescence, extinction, the round bound, or a fault."""
    if round_bound is None:
        round_bound = world.spec.bound if world.spec is not None else 30 * world.n + 30
    if round_bound < 1:
        raise ValueError("round_bound must be >= 1")
    trace = Trace(world.spec, world.n, world.black_hole)
    trace.token_total = world.budget * len(world.agents)
    if not world.live:
        trace.termination = INVALID
        _finish(trace, world)
        return trace
    seen = {world.config(): world.round}
    while True:
        try:
            rec = step(world, automaton)
        except SimulationError as exc:
            trace.termination = FATAL
            trace.fault = f"{type(exc).__name__}: {exc}"
            log.info("round %d: %s", world.round + 1, trace.fault)
            break
        trace.rounds.append(rec)
        if any(a.state == FAULT for a in world.agents if a.status != DEAD):
            trace.termination = FATAL
            trace.fault = "ProtocolFault: an agent reached FAULT"
            break
        if not any(a.status != DEAD for a in world.agents):
            trace.termination = EXTINCT
            break
        cfg = world.config()
        if cfg in seen:
            trace.termination = QUIESCENT
            trace.period = world.round - seen[cfg]
            break
        seen[cfg] = world.round
        if not world.live:
            # only halted agents left: nothing can change any more
            trace.termination = QUIESCENT
            trace.period = 1
            break
        if world.round >= round_bound:
            trace.termination = BOUND
            break
    _finish(trace, world)
    return trace


def _finish(trace: Trace, world: RingWorld) -> None:
    trace.final_marks = tuple(sorted(world.marks))
    trace.final_status = tuple(a.status for a in world.agents)
