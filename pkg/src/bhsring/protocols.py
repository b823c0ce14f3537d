"""The three black-hole-search automata and their walking sub-machines.

Naming: a protocol state such as ``LEADER`` is an instantaneous dispatcher
(its loop test); the rounds it actually spends are sub-states like
``LEADER.probe``.  ``X+put`` / ``X+flip`` are entry variants of a state that
additionally put a token or adopt the partner's orientation in the same Move
stage, then continue exactly like ``X``.
"""

from __future__ import annotations

import enum
from dataclasses import replace
from functools import lru_cache
from typing import Optional

from .agent import (FAULT, HALT_ACTION, LEFT, NOBODY, RIGHT, STAY,
                    Action, Automaton, Guard, ProtocolInfo, StateDef, danger, family, opposite,
                    present, present_idle, present_sub, same_orientation, tokens_eq, tokens_ge)


class ProtocolId(str, enum.Enum):
    RING1 = "ring1"
    RING2 = "ring2"
    RING3 = "ring3"

    @property
    def label(self) -> str:
        return {"ring1": "Ring1-Movable", "ring2": "Ring2-OrientedUnmovable",
                "ring3": "Ring3-UnorientedUnmovable"}[self.value]


RING1_INFO = ProtocolInfo("ring1", min_agents=3, tokens=1, movable=True,
                          needs_orientation=False,
                          description="cautious walk, any ring, 1 movable token")
RING2_INFO = ProtocolInfo("ring2", min_agents=4, tokens=2, movable=False,
                          needs_orientation=True,
                          description="paired walk, oriented ring, 2 unmovable tokens")
RING3_INFO = ProtocolInfo("ring3", min_agents=5, tokens=2, movable=False,
                          needs_orientation=False,
                          description="paired walk, unoriented ring, 2 unmovable tokens")
RING1_UNMOVABLE_INFO = ProtocolInfo(
    "ring1-unmovable", min_agents=3, tokens=1, movable=False, needs_orientation=True,
    description="naive one-unmovable-token walker (lower-bound witness only)")

TABLE = {ProtocolId.RING1: RING1_INFO, ProtocolId.RING2: RING2_INFO,
         ProtocolId.RING3: RING3_INFO}


# Sub-states of a leader that is busy: walking with a partner, or between
# nodes of the slow walk.  Agents only sign up with a leader that is not.
WALKING = ("probe", "return", "advance", "slow", "slow-w1")
# Sub-states of a follower that is already walking.
FOLLOWING = ("w1", "w2", "advance", "mark")


def _move(side: str, put: bool = False) -> Action:
    return Action(token_op="put" if put else None, move=side)


class Machine:
    """Collects StateDefs; entry variants are materialised at build time."""

    def __init__(self):
        self.defs: dict = {}
        self._variants: set = set()

    def state(self, name: str, action: Optional[Action], rules=(), default=None) -> str:
        if name in self.defs:
            raise ValueError(f"state {name} defined twice")
        self.defs[name] = StateDef(name, action, tuple(rules), default)
        return name

    def add(self, defs) -> None:
        for sd in defs:
            if sd.name in self.defs:
                raise ValueError(f"state {sd.name} defined twice")
            self.defs[sd.name] = sd

    def variant(self, base: str, put: bool = False, flip: bool = False) -> str:
        if not put and not flip:
            return base
        name = base + ("+put" if put else "") + ("+flip" if flip else "")
        self._variants.add((name, base, put, flip))
        return name

    def build(self, info: ProtocolInfo, initial: str) -> Automaton:
        for name, base, put, flip in sorted(self._variants):
            sd = self.defs[base]
            if sd.instant:
                raise ValueError(f"cannot make an entry variant of instant state {base}")
            act = replace(sd.action, token_op="put" if put else sd.action.token_op, flip=flip)
            self.defs[name] = StateDef(name, act, sd.rules, sd.default or base)
        return Automaton(info, self.defs.values(), initial)


# ---------------------------------------------------------------- sub-machines

def build_cautious_walk(side: str, prefix: str, done: tuple) -> tuple:
    """Three-round cautious step toward ``side``.

    Round 1 puts the token and steps out, round 2 steps back, round 3 picks
    the token up and steps out again.  The check after round 3 is ``done``:
    ``(guard, target)`` pairs; when none fires the walk repeats.  Returns the
    StateDefs; the entry state is ``f"{prefix}.put"``.
    """
    back = opposite(side)
    return (
        StateDef(f"{prefix}.put", Action(token_op="put", move=side), (),
                 f"{prefix}.back"),
        # the token left behind must still be there when we come back for it
        StateDef(f"{prefix}.back", Action(move=back),
                 ((~tokens_ge(1), FAULT),), f"{prefix}.pick"),
        StateDef(f"{prefix}.pick", Action(token_op="pick", move=side), tuple(done),
                 f"{prefix}.put"),
    )


def build_paired_walk(role: str, side: str, prefix: str, leader: str,
                      after: str, after_mark: Optional[str] = None) -> tuple:
    """One paired-walk step toward ``side``.

    Leader (``role="leader"``): probe, come back, advance; entry
    ``f"{prefix}.probe"``, then ``after``.  Follower: wait two rounds; if an
    agent of family ``leader`` is back, advance with it (then ``after``),
    otherwise mark the link toward ``side`` (then ``after_mark``); entry
    ``f"{prefix}.w1"``.
    """
    back = opposite(side)
    if role == "leader":
        return (
            StateDef(f"{prefix}.probe", Action(move=side), (), f"{prefix}.return"),
            StateDef(f"{prefix}.return", Action(move=back), (), f"{prefix}.advance"),
            StateDef(f"{prefix}.advance", Action(move=side), (), after),
        )
    if role != "follower":
        raise ValueError(f"unknown role {role!r}")
    return (
        StateDef(f"{prefix}.w1", STAY, (), f"{prefix}.w2"),
        # the leader must be the one that just stepped back, not a passer-by;
        # partners share an orientation, so an opposite one is someone else's
        StateDef(f"{prefix}.w2", STAY,
                 ((present_sub(leader, only=("return",), same=True), f"{prefix}.advance"),),
                 f"{prefix}.mark"),
        StateDef(f"{prefix}.advance", Action(move=side), (), after),
        StateDef(f"{prefix}.mark", Action(mark=side), (), after_mark),
    )


def _move_until(m: Machine, name: str, side: str, stop_rules, *, first_put: bool = False):
    """Do-until walk: move toward ``side`` then test ``stop_rules`` on arrival."""
    m.state(name, Action(move=side), stop_rules)
    if first_put:
        return m.variant(name, put=True)
    return name


def _halt(m: Machine) -> None:
    m.state("HALT", HALT_ACTION)


# ---------------------------------------------------------------- Ring 1

def build_ring1() -> Automaton:
    """Cautious walk Left until an abandoned token (or a marked link), mark,
    then the same toward Right, mark, halt.  Works on any ring, k >= 3.
    """
    m = Machine()
    m.state("START", STAY, (), "CW-LEFT.put")
    abandoned = tokens_ge(1) & NOBODY
    m.add(build_cautious_walk(LEFT, "CW-LEFT",
                              ((danger(LEFT) | abandoned, "MARK-LEFT"),)))
    # Marking takes one round; two idle rounds keep the three-round phase
    # shared by all walkers.
    m.state("MARK-LEFT", Action(mark=LEFT), (), "MARK-LEFT.pad1")
    m.state("MARK-LEFT.pad1", STAY, (), "MARK-LEFT.pad2")
    m.state("MARK-LEFT.pad2", STAY, ((danger(RIGHT), "MARK-RIGHT"),), "CW-RIGHT.put")
    m.add(build_cautious_walk(RIGHT, "CW-RIGHT",
                              ((danger(RIGHT) | abandoned, "MARK-RIGHT"),)))
    m.state("MARK-RIGHT", Action(mark=RIGHT), (), "HALT")
    _halt(m)
    return m.build(RING1_INFO, "START")


def build_ring1_unmovable() -> Automaton:
    """Ring1's decision rule with a single unmovable token dropped at home.

    Without a token to carry, a token with nobody beside it no longer means
    its owner vanished, so symmetric rings make every survivor mark a link.
    """
    m = Machine()
    rule_l = ((danger(LEFT) | (tokens_ge(1) & NOBODY), "MARK-LEFT"),)
    rule_r = ((danger(RIGHT) | (tokens_ge(1) & NOBODY), "MARK-RIGHT"),)
    first = _move_until(m, "GO-LEFT", LEFT, rule_l, first_put=True)
    m.state("START", STAY, (), first)
    m.state("MARK-LEFT", Action(mark=LEFT), ((danger(RIGHT), "MARK-RIGHT"),), "GO-RIGHT")
    m.state("GO-RIGHT", Action(move=RIGHT), rule_r)
    m.state("MARK-RIGHT", Action(mark=RIGHT), (), "HALT")
    _halt(m)
    return m.build(RING1_UNMOVABLE_INFO, "START")


# ---------------------------------------------------------------- Ring 2

def build_ring2() -> Automaton:
    """Oriented ring, k >= 4 agents, two unmovable tokens each."""
    m = Machine()
    L, R = LEFT, RIGHT
    one = tokens_eq(1)
    free_rl = present_idle("RIGHT-LEADER", WALKING)
    ready_rf = present_idle("RIGHT-FOLLOWER", FOLLOWING)
    # a pair formed here (the follower is still around): no second one
    paired = present("LEADER") | present("FOLLOWER")
    # another pair going the same way is waiting on its leader here
    ahead = present_sub("FOLLOWER", only=("w1", "w2"))

    # START / CHECK-LEFT: drop a token at home, walk Left to the next token
    first = _move_until(m, "CHECK-LEFT", L, ((tokens_ge(1), "GO-BACK"),), first_put=True)
    m.state("START", STAY, (), first)

    # GO-BACK: walk Right to the home token, drop the second token, pick a role
    m.state("GO-BACK", Action(move=R), (
        (tokens_ge(1) & paired, m.variant("LEFT-SEARCHER.move", put=True)),
        (tokens_ge(1) & danger(L) & (present("ALONE") | present("WAITING")),
         m.variant("FOLLOWER.idle", put=True)),
        (tokens_ge(1) & (present("ALONE") | present("WAITING")),
         m.variant("FOLLOWER.w1", put=True)),
        (tokens_ge(1), m.variant("ALONE.move", put=True)),
    ))

    # ALONE: walk Left to a single-token node (or a home being refilled)
    stop = one | (tokens_eq(2) & present("GO-BACK"))
    m.state("ALONE", None, (
        (stop & free_rl, "RIGHT-FOLLOWER.wait"),
        # never a second LEADER on a node that already has one
        (stop & paired, "LEFT-SEARCHER"),
        (stop & present("GO-BACK") & ~present("WAITING"), "LEADER"),
        (stop & present("WAITING") & ~present("GO-BACK") & danger(L), "FOLLOWER.idle"),
        (stop & present("WAITING") & ~present("GO-BACK"), "FOLLOWER.w1"),
        (stop & NOBODY, "WAITING"),
        # a pair is already busy here: keep out of its way, like GO-BACK does
        (stop, "LEFT-SEARCHER"),
    ), "ALONE.move")
    m.state("ALONE.move", Action(move=L), (), "ALONE")

    # WAITING: hold the single-token node until someone shows up
    m.state("WAITING", STAY, (
        (paired, "LEFT-SEARCHER"),
        # an ALONE agent seeing a free RIGHT-LEADER joins it instead
        (present("GO-BACK") | (present("ALONE") & ~free_rl), "LEADER"),
        (free_rl, "RIGHT-FOLLOWER.wait"),
    ))

    # LEADER: paired walk Left until the Left link is marked
    # a pair catching up with another one drops out, both halves at once
    m.state("LEADER", None, ((danger(L), "RIGHT-SEARCHER"), (ahead, "LEFT-SEARCHER")),
            "LEADER.probe")
    m.add(build_paired_walk("leader", L, "LEADER", "LEADER", after="LEADER"))

    # FOLLOWER: paired walk Left while the leader keeps coming back
    m.state("FOLLOWER", None, (
        (ahead, "LEFT-SEARCHER"),
        (present("LEADER") & ~danger(L), "FOLLOWER.w1"),
    ), "FOLLOWER.idle")
    m.state("FOLLOWER.idle", STAY, ((present("LEADER") & ~danger(L), "FOLLOWER.w1"),))
    m.add(build_paired_walk("follower", L, "FOLLOWER", "LEADER", after="FOLLOWER",
                            after_mark="RIGHT-LEADER"))

    # LEFT-SEARCHER: Left to a single-token node, wait for the RIGHT-LEADER
    m.state("LEFT-SEARCHER", None, (
        (one & free_rl, "RIGHT-FOLLOWER.wait"),
        (one, "LEFT-SEARCHER.wait"),
    ), "LEFT-SEARCHER.move")
    m.state("LEFT-SEARCHER.move", Action(move=L), (), "LEFT-SEARCHER")
    # waiting is only ever done on a single-token node: re-check every round
    m.state("LEFT-SEARCHER.wait", STAY, (), "LEFT-SEARCHER")

    # RIGHT-SEARCHER: Right to a single-token node; join a RIGHT-LEADER there
    m.state("RIGHT-SEARCHER", None, (
        (one & free_rl, "RIGHT-FOLLOWER.wait"),
        (one, "RIGHT-SEARCHER.wait"),
    ), "RIGHT-SEARCHER.move")
    m.state("RIGHT-SEARCHER.move", Action(move=R), (), "RIGHT-SEARCHER")
    m.state("RIGHT-SEARCHER.wait", STAY, (), "RIGHT-SEARCHER")

    # RIGHT-LEADER: Right to the gate, wait for a partner, paired walk Right
    m.state("RIGHT-LEADER", None, (
        (one & ready_rf, "RIGHT-LEADER.walk"),
        (one, "RIGHT-LEADER.wait"),
    ), "RIGHT-LEADER.move")
    m.state("RIGHT-LEADER.move", Action(move=R), (), "RIGHT-LEADER")
    m.state("RIGHT-LEADER.wait", STAY, ((ready_rf, "RIGHT-LEADER.walk"),))
    m.state("RIGHT-LEADER.walk", None, ((danger(R), "RIGHT-LEADER.blocked"),),
            "RIGHT-LEADER.probe")
    m.state("RIGHT-LEADER.blocked", STAY)
    m.add(build_paired_walk("leader", R, "RIGHT-LEADER", "RIGHT-LEADER",
                            after="RIGHT-LEADER.walk"))

    # RIGHT-FOLLOWER: paired walk Right; mark Right and halt on a lost leader.
    # Newcomers wait one round in view, so leader and follower start together.
    m.state("RIGHT-FOLLOWER", None, ((present("RIGHT-LEADER"), "RIGHT-FOLLOWER.w1"),),
            "RIGHT-FOLLOWER.wait")
    m.state("RIGHT-FOLLOWER.wait", STAY, ((free_rl, "RIGHT-FOLLOWER.w1"),))
    m.add(build_paired_walk("follower", R, "RIGHT-FOLLOWER", "RIGHT-LEADER",
                            after="RIGHT-FOLLOWER", after_mark="HALT"))
    _halt(m)
    return m.build(RING2_INFO, "START")


# ---------------------------------------------------------------- Ring 3

def _aligned(m: Machine, partner: str, base: str, put: bool, gate: Guard,
             walk_side: str, idle: str) -> list:
    """Rules that join ``partner`` (a family) as its follower.

    The follower adopts the partner's orientation (preferring one that
    already agrees), and idles instead of walking when the partner's walking
    side is already marked.
    """
    same = present(partner, same=True)
    other = opposite(walk_side)
    return [
        (gate & same & danger(walk_side), m.variant(idle, put=put)),
        (gate & same, m.variant(base, put=put)),
        (gate & danger(other), m.variant(idle, put=put, flip=True)),
        (gate, m.variant(base, put=put, flip=True)),
    ]


def build_ring3() -> Automaton:
    """Unoriented ring, k >= 5 agents, two unmovable tokens each."""
    m = Machine()
    L, R = LEFT, RIGHT
    one = tokens_eq(1)

    # START / CHECK-LEFT / CHECK-RIGHT: token at home, look Left, then Right
    first = _move_until(m, "CHECK-LEFT", L, ((tokens_ge(1), "CHECK-RIGHT"),),
                        first_put=True)
    m.state("START", STAY, (), first)
    m.state("CHECK-RIGHT", Action(move=R), ((tokens_ge(1), "CHECK-RIGHT.again"),))
    m.state("CHECK-RIGHT.again", Action(move=R), ((tokens_ge(1), "GO-BACK"),))

    # GO-BACK: Left to the single home token, second token, pick a role
    at_home = one
    rl = present("RIGHT-LEADER")
    free_rl = present_idle("RIGHT-LEADER", WALKING)
    ready_rf = present_idle("RIGHT-FOLLOWER", FOLLOWING)
    # a pair formed here (the follower is still around): no second one
    paired = present("LEADER") | present("FOLLOWER")
    go_back_rules = [
        (at_home & free_rl, m.variant("RIGHT-FOLLOWER.wait", put=True)),
        (at_home & paired, m.variant("SEARCHER.move", put=True)),
    ]
    go_back_rules += _aligned(m, "WAITING", "FOLLOWER.w1", True,
                              at_home & present("WAITING"), L, "FOLLOWER.idle")
    go_back_rules += _aligned(m, "ALONE", "FOLLOWER.w1", True,
                              at_home & present("ALONE"), L, "FOLLOWER.idle")
    go_back_rules.append((at_home, m.variant("ALONE.move", put=True)))
    m.state("GO-BACK", Action(move=L), go_back_rules)

    # ALONE: Left to a single-token node, then sort out who pairs with whom.
    # Agents still checking their neighbourhood are only passing by.
    def arrived(*ignore):
        skip = ("CHECK-LEFT", "CHECK-RIGHT") + ignore
        return Guard(f"agent other than {'/'.join(skip)} present",
                     lambda p: any(family(st) not in skip for st, _ in p.others))

    stop = one | (tokens_eq(2) & present("GO-BACK"))
    waiting_only = stop & present("WAITING") & ~present("GO-BACK")
    goback_only = stop & present("GO-BACK") & ~present("WAITING")
    alone_rules = [
        # two ALONE agents meeting head-on see mirror images of each other and
        # cannot split roles: both wait, a third arrival sorts them out
        (stop & ~arrived("ALONE"), "WAITING"),
        (stop & free_rl, "RIGHT-FOLLOWER.wait"),
        (stop & paired, "SEARCHER"),
        (waiting_only & same_orientation("ALONE", "WAITING"), "SEARCHER"),
    ]
    alone_rules += _aligned(m, "WAITING", "FOLLOWER.w1", False, waiting_only, L,
                            "FOLLOWER.idle")
    alone_rules += [
        (goback_only & same_orientation("ALONE", "GO-BACK"), "SEARCHER"),
        (goback_only, "LEADER"),
        (stop, "SEARCHER"),
    ]
    m.state("ALONE", None, alone_rules, "ALONE.move")
    m.state("ALONE.move", Action(move=L), (), "ALONE")

    # WAITING
    candidate = present("GO-BACK") | present("ALONE")
    # a GO-BACK always signs up as follower, so it is the one to match when
    # present; ALONE agents only otherwise
    twin = ((present("GO-BACK") & same_orientation("WAITING", "GO-BACK"))
            | (~present("GO-BACK") & same_orientation("WAITING", "ALONE")))
    m.state("WAITING", STAY, (
        (free_rl, "RIGHT-FOLLOWER.wait"),
        (candidate & ~paired & twin, "SEARCHER"),
        (candidate & ~paired, "LEADER"),
        (arrived("WAITING"), "SEARCHER"),
    ))

    # LEADER.  A pair that catches up with another one going the same way
    # (its follower is waiting here) drops out: leader and follower see the
    # same thing and both turn SEARCHER.
    ahead = present_sub("FOLLOWER", only=("w1", "w2"), same=True)
    m.state("LEADER", None, ((danger(L) | ahead, "SEARCHER"),), "LEADER.probe")
    m.add(build_paired_walk("leader", L, "LEADER", "LEADER", after="LEADER"))

    # FOLLOWER: orientation already aligned on entry
    m.state("FOLLOWER", None, ((danger(L), "FOLLOWER.idle"), (ahead, "SEARCHER")),
            "FOLLOWER.w1")
    m.state("FOLLOWER.idle", STAY, ((~danger(L), "FOLLOWER.w1"),))
    m.add(build_paired_walk("follower", L, "FOLLOWER", "LEADER", after="FOLLOWER",
                            after_mark="RIGHT-LEADER"))

    # SEARCHER: Right to a gate, become a RIGHT-FOLLOWER there
    m.state("SEARCHER", None, ((one, "RIGHT-FOLLOWER.wait"),), "SEARCHER.move")
    m.state("SEARCHER.move", Action(move=R), (), "SEARCHER")

    # RIGHT-LEADER: to the gate; if alone, slow walk to the other gate and back.
    # Partners show up as waiting RIGHT-FOLLOWERs; agents that are about to
    # become one are waited for.
    joiner = (present("WAITING") | present("ALONE") | present("SEARCHER")
              | present("GO-BACK") | ready_rf)
    # a pair still checking the link here: let its follower settle it first
    pending = present_sub("FOLLOWER", only=("w1", "w2"))
    go = ready_rf & ~pending
    m.state("RIGHT-LEADER", None, ((one, "RIGHT-LEADER.gate"),), "RIGHT-LEADER.move")
    m.state("RIGHT-LEADER.move", Action(move=R), (), "RIGHT-LEADER")
    m.state("RIGHT-LEADER.gate", None, (
        (joiner, "RIGHT-LEADER.wait"),
    ), "RIGHT-LEADER.slow")
    m.state("RIGHT-LEADER.wait", STAY, (
        (go, "RIGHT-LEADER.walk"),
        (joiner, "RIGHT-LEADER.wait"),
    ), "RIGHT-LEADER.slow")
    m.state("RIGHT-LEADER.slow", Action(move=R), (), "RIGHT-LEADER.slow-w1")
    m.state("RIGHT-LEADER.slow-w1", STAY, (), "RIGHT-LEADER.slow-w2")
    m.state("RIGHT-LEADER.slow-w2", STAY, (
        (one & go, "RIGHT-LEADER.walk"),
        (one & joiner, "RIGHT-LEADER.wait"),
        (one | danger(R), "RIGHT-LEADER.back"),
    ), "RIGHT-LEADER.slow")
    # A homebase whose agent is still out looks like a gate, so one lap may
    # turn round too early: keep sweeping between gates until a partner shows.
    m.state("RIGHT-LEADER.back", Action(move=L), (
        (one & go, "RIGHT-LEADER.walk"),
        (one & joiner, "RIGHT-LEADER.hold"),
        (one | danger(L), "RIGHT-LEADER.slow"),
    ))
    m.state("RIGHT-LEADER.hold", STAY, (
        (go, "RIGHT-LEADER.walk"),
        (joiner, "RIGHT-LEADER.hold"),
    ), "RIGHT-LEADER.slow")
    m.state("RIGHT-LEADER.walk", None, ((danger(R), "RIGHT-LEADER.blocked"),),
            "RIGHT-LEADER.probe")
    m.state("RIGHT-LEADER.blocked", STAY)
    m.add(build_paired_walk("leader", R, "RIGHT-LEADER", "RIGHT-LEADER",
                            after="RIGHT-LEADER.walk"))

    # RIGHT-FOLLOWER: wait (in view) for a free RIGHT-LEADER, align, walk Right
    # only a leader that is itself looking for a partner this round
    def rl_ready(same=None):
        return (present_sub("RIGHT-LEADER", only=("wait", "hold"), same=same)
                | (one & present_sub("RIGHT-LEADER", only=("slow-w2", "back"), same=same)))
    m.state("RIGHT-FOLLOWER.wait", STAY, (
        (rl_ready(same=True) & ~pending, "RIGHT-FOLLOWER.w1"),
        (rl_ready() & ~pending, m.variant("RIGHT-FOLLOWER.w1", flip=True)),
        # a second token arrived here: this is no gate any more
        (~one, "SEARCHER.move"),
    ))
    m.state("RIGHT-FOLLOWER.loop", None, ((rl, "RIGHT-FOLLOWER.w1"),),
            "RIGHT-FOLLOWER.wait")
    m.add(build_paired_walk("follower", R, "RIGHT-FOLLOWER", "RIGHT-LEADER",
                            after="RIGHT-FOLLOWER.loop", after_mark="HALT"))
    _halt(m)
    return m.build(RING3_INFO, "START")


BUILDERS = {
    "ring1": build_ring1,
    "ring2": build_ring2,
    "ring3": build_ring3,
    "ring1-unmovable": build_ring1_unmovable,
}


@lru_cache(maxsize=None)
def get_automaton(name: str) -> Automaton:
    key = name.value if isinstance(name, ProtocolId) else name
    try:
        return BUILDERS[key]()
    except KeyError:
        raise KeyError(f"unknown protocol {name!r}; choose from {sorted(BUILDERS)}") from None
