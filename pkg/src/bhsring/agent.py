"""Moore-automaton agents: percepts, actions, guards and the automaton itself.

An agent is a finite Moore machine.  Each round it receives a :class:`Percept`
(what it can see at its node, in its own Left/Right frame), the transition
function picks the next state, and the output function maps that state to an
:class:`Action` executed in the Move stage.

States are plain strings.  A dotted suffix names a sub-state of a protocol
state (``"LEADER.probe"`` belongs to the ``LEADER`` family); guards that test
for "a LEADER agent" test the family.

Some states are *instantaneous*: they carry no action and are resolved on the
same percept (pseudocode ``State := X`` followed by X's own checks happens in
one Compute stage).  They never persist between rounds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

log = logging.getLogger(__name__)

LEFT = "left"
RIGHT = "right"
SIDES = (LEFT, RIGHT)

FAULT = "FAULT"


def opposite(side: Optional[str]) -> Optional[str]:
    if side is None:
        return None
    return RIGHT if side == LEFT else LEFT


def family(state: str) -> str:
    """Protocol-level state name of a (sub-)state or entry variant."""
    return state.split(".", 1)[0].split("+", 1)[0]


@dataclass(frozen=True)
class Percept:
    """Everything one agent observes during the Look stage.

    ``others`` holds one ``(state, same_orientation)`` pair per distinct
    combination present among co-located agents (the observer excluded).
    It is a set, so two agents in the same state and orientation look like
    one.  ``tokens_here`` counts placed tokens only.
    """

    others: frozenset = frozenset()
    tokens_here: int = 0
    arrival: Optional[str] = None
    carried: int = 0
    left_danger: bool = False
    right_danger: bool = False

    @property
    def states_present(self) -> frozenset:
        return frozenset(s for s, _ in self.others)

    @property
    def orientations_present(self) -> dict:
        out: dict = {}
        for s, same in self.others:
            out.setdefault(s, set()).add(same)
        return {s: frozenset(v) for s, v in out.items()}

    @property
    def nobody(self) -> bool:
        return not self.others

    def has(self, fam: str, same: Optional[bool] = None) -> bool:
        for s, o in self.others:
            if family(s) == fam and (same is None or o == same):
                return True
        return False

    def danger(self, side: str) -> bool:
        return self.left_danger if side == LEFT else self.right_danger

    def to_dict(self) -> dict:
        return {
            "others": sorted([s, o] for s, o in self.others),
            "tokens": self.tokens_here,
            "arrival": self.arrival,
            "carried": self.carried,
            "danger": [self.left_danger, self.right_danger],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Percept":
        return cls(
            others=frozenset((s, bool(o)) for s, o in d["others"]),
            tokens_here=d["tokens"],
            arrival=d["arrival"],
            carried=d["carried"],
            left_danger=d["danger"][0],
            right_danger=d["danger"][1],
        )


@dataclass(frozen=True)
class Action:
    """What an agent does in the Move stage.

    Order of execution: orientation flip, token operation, then either a mark
    or a move.  ``halt`` ends the agent's activity for good.
    """

    token_op: Optional[str] = None  # "put" | "pick" | None
    move: Optional[str] = None
    mark: Optional[str] = None
    halt: bool = False
    flip: bool = False

    def __post_init__(self):
        if self.token_op not in (None, "put", "pick"):
            raise ValueError(f"bad token op {self.token_op!r}")
        for side in (self.move, self.mark):
            if side not in (None, LEFT, RIGHT):
                raise ValueError(f"bad side {side!r}")
        if self.move and (self.mark or self.halt):
            raise ValueError("a marking or halting action cannot also move")

    def __str__(self) -> str:
        parts = []
        if self.flip:
            parts.append("flip")
        if self.token_op:
            parts.append(self.token_op)
        if self.mark:
            parts.append(f"mark-{self.mark}")
        if self.move:
            parts.append(f"move-{self.move}")
        if self.halt:
            parts.append("halt")
        return "+".join(parts) or "stay"

    def to_dict(self) -> dict:
        return {"token": self.token_op, "move": self.move, "mark": self.mark,
                "halt": self.halt, "flip": self.flip}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Action":
        return cls(d["token"], d["move"], d["mark"], d["halt"], d["flip"])


STAY = Action()
HALT_ACTION = Action(halt=True)


class Guard:
    """A named predicate over percepts; combine with ``&``, ``|`` and ``~``."""

    __slots__ = ("text", "test")

    def __init__(self, text: str, test: Callable[[Percept], bool]):
        self.text = text
        self.test = test

    def __call__(self, p: Percept) -> bool:
        return self.test(p)

    def __and__(self, other: "Guard") -> "Guard":
        a, b = self.test, other.test
        return Guard(f"({self.text} and {other.text})", lambda p: a(p) and b(p))

    def __or__(self, other: "Guard") -> "Guard":
        a, b = self.test, other.test
        return Guard(f"({self.text} or {other.text})", lambda p: a(p) or b(p))

    def __invert__(self) -> "Guard":
        a = self.test
        return Guard(f"not {self.text}", lambda p: not a(p))

    def __repr__(self) -> str:
        return f"Guard({self.text})"


ALWAYS = Guard("always", lambda p: True)
NOBODY = Guard("no other agent", lambda p: not p.others)
SOMEBODY = Guard("another agent", lambda p: bool(p.others))


def present(fam: str, same: Optional[bool] = None) -> Guard:
    if same is None:
        return Guard(f"{fam} present", lambda p: p.has(fam))
    rel = "same" if same else "opposite"
    return Guard(f"{fam}[{rel}] present", lambda p: p.has(fam, same))


def substate(state: str) -> str:
    """Sub-state part of a state name: ``"LEADER.probe+put"`` gives ``"probe"``."""
    return state.split("+", 1)[0].partition(".")[2]


def present_sub(fam: str, only: tuple = (), busy: tuple = (),
                same: Optional[bool] = None) -> Guard:
    """An agent of ``fam`` is here in one of the ``only`` sub-states (any if
    empty) and in none of the ``busy`` ones."""
    def test(p: Percept) -> bool:
        for s, o in p.others:
            if family(s) != fam or (same is not None and o != same):
                continue
            sub = substate(s)
            if (not only or sub in only) and sub not in busy:
                return True
        return False
    rel = "" if same is None else ("[same]" if same else "[opposite]")
    what = (f" in {'/'.join(only)}" if only else "") + \
        (f" not {'/'.join(busy)}" if busy else "")
    return Guard(f"{fam}{rel} present{what}", test)


def present_idle(fam: str, busy: tuple, same: Optional[bool] = None) -> Guard:
    return present_sub(fam, busy=busy, same=same)


def tokens_eq(k: int) -> Guard:
    return Guard(f"tokens=={k}", lambda p: p.tokens_here == k)


def tokens_ge(k: int) -> Guard:
    return Guard(f"tokens>={k}", lambda p: p.tokens_here >= k)


def danger(side: str) -> Guard:
    return Guard(f"{side} link dangerous", lambda p: p.danger(side))


def same_orientation(fam_a: str, fam_b: str) -> Guard:
    """Some agent of ``fam_a`` and some agent of ``fam_b`` share an orientation.

    Both relative flags are taken w.r.t. the observer, so equal flags mean
    equal absolute orientations.
    """
    def test(p: Percept) -> bool:
        a = {o for s, o in p.others if family(s) == fam_a}
        b = {o for s, o in p.others if family(s) == fam_b}
        return bool(a & b)
    return Guard(f"{fam_a} shares orientation with {fam_b}", test)


@dataclass(frozen=True)
class StateDef:
    """One automaton state.  ``action=None`` marks an instantaneous state."""

    name: str
    action: Optional[Action]
    rules: tuple = ()
    default: Optional[str] = None  # None: remain in this state

    @property
    def instant(self) -> bool:
        return self.action is None

    def next(self, p: Percept) -> str:
        for guard, target in self.rules:
            if guard.test(p):
                return target
        return self.name if self.default is None else self.default


@dataclass(frozen=True)
class ProtocolInfo:
    """Resource requirements of a protocol (one row of the results table)."""

    name: str
    min_agents: int
    tokens: int
    movable: bool
    needs_orientation: bool
    description: str = ""


class Automaton:
    """A finite Moore automaton ``(S, S0, delta, phi)`` built from StateDefs.

    The transition on a percept follows rules top to bottom, then chains
    through instantaneous states until it reaches a state with an action.
    Results are memoised; the automaton is otherwise immutable.
    """

    def __init__(self, info: ProtocolInfo, states: Iterable[StateDef], initial: str):
        table = {}
        for sd in states:
            if sd.name in table:
                raise ValueError(f"duplicate state {sd.name}")
            table[sd.name] = sd
        table.setdefault(FAULT, StateDef(FAULT, HALT_ACTION))
        if initial not in table:
            raise ValueError(f"unknown initial state {initial}")
        for sd in table.values():
            for _, target in sd.rules:
                if target not in table:
                    raise ValueError(f"{sd.name}: unknown target {target}")
            if sd.default is not None and sd.default not in table:
                raise ValueError(f"{sd.name}: unknown default {sd.default}")
        self.info = info
        self.initial = initial
        self._states: Mapping[str, StateDef] = table
        self._cache: dict = {}

    @property
    def name(self) -> str:
        return self.info.name

    @property
    def states(self) -> frozenset:
        return frozenset(self._states)

    @property
    def families(self) -> frozenset:
        return frozenset(family(s) for s in self._states)

    def state_def(self, state: str) -> StateDef:
        return self._states[state]

    def transition(self, state: str, p: Percept) -> str:
        key = (state, p)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if state not in self._states:
            raise KeyError(f"{self.name}: unknown state {state!r}")
        nxt = self._states[state].next(p)
        hops = 0
        while self._states[nxt].instant:
            nxt = self._states[nxt].next(p)
            hops += 1
            if hops > len(self._states):
                nxt = FAULT
                break
        self._cache[key] = nxt
        return nxt

    def output(self, state: str) -> Action:
        act = self._states[state].action
        if act is None:
            raise ValueError(f"{state} is instantaneous and has no output")
        return act

    def dump(self) -> str:
        """Human-readable listing of states, outputs and guarded transitions."""
        i = self.info
        lines = [
            f"automaton {i.name}",
            f"  agents>={i.min_agents} tokens={i.tokens} "
            f"{'movable' if i.movable else 'unmovable'} "
            f"{'oriented-only' if i.needs_orientation else 'any-orientation'}",
            f"  initial {self.initial}",
            f"  states {len(self._states)}",
        ]
        for name in sorted(self._states):
            sd = self._states[name]
            out = "(instant)" if sd.instant else f"[{sd.action}]"
            lines.append(f"{name} {out}")
            for guard, target in sd.rules:
                lines.append(f"    if {guard.text} -> {target}")
            lines.append(f"    else -> {sd.default or name}")
        return "\n".join(lines) + "\n"


def decide(automaton: Automaton, state: str, percept: Percept) -> tuple:
    """Compute stage: ``(next_state, action)`` with Moore output semantics."""
    nxt = automaton.transition(state, percept)
    if nxt == FAULT and state != FAULT:
        log.warning("%s: %s reached FAULT on %s", automaton.name, state, percept)
    return nxt, automaton.output(nxt)


# Node indices grow counterclockwise: clockwise is the step v -> v-1.
CW = -1
CCW = 1


def side_of(global_dir: int, left_cw: bool) -> str:
    """Agent-relative name of a global direction (-1 clockwise, +1 counter)."""
    return LEFT if (global_dir == CW) == left_cw else RIGHT


def global_dir(side: str, left_cw: bool) -> int:
    """Global direction (-1 clockwise, +1 counterclockwise) of a relative side."""
    cw = (side == LEFT) == left_cw
    return CW if cw else CCW


def fix_orientation(agent, world) -> bool:
    """Choose an agent's Left at its first step; returns ``left_cw``.

    Oriented rings label the clockwise port 1 everywhere, so Left is
    clockwise for everyone.  Otherwise the agent takes port 1 of its homebase
    as Left and keeps that global direction from then on.
    """
    return world.cw_port[agent.home] == 1


def observe(world, agent) -> Percept:
    """Percept of one live agent against the world's current snapshot."""
    here = [b for b in world.agents
            if b is not agent and b.location == agent.location and b.status != "dead"]
    return build_percept(world, agent, here)


def build_percept(world, agent, companions) -> Percept:
    v = agent.location
    lcw = agent.left_cw
    others = frozenset((b.state, b.left_cw == lcw) for b in companions)
    arrival = None if not agent.arrived else side_of(-agent.arrived, lcw)
    cw_marked = world.link_marked(v, CW)
    ccw_marked = world.link_marked(v, CCW)
    if lcw:
        ld, rd = cw_marked, ccw_marked
    else:
        ld, rd = ccw_marked, cw_marked
    return Percept(others, world.tokens[v], arrival, agent.carried, ld, rd)
