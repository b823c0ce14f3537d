"""A compiled twin of the round engine for bulk sweeps.

The Python engine in ``world`` is the reference: it keeps every percept and
action of every round.  Sweeps only need the verdict and the property pack,
so this engine runs the same semantics on integer arrays under numba and
records only what the verifier reads: family switches, deaths and marks.

Transitions are not precompiled.  The engine looks each (state, percept)
pair up in an exact hash table; on a miss it hands the percept back to
Python, which asks the automaton and inserts the answer, and the round is
retried (nothing is mutated before all agents have decided).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .agent import FAULT, LEFT, RIGHT, Automaton, Percept, side_of
from .scenario import ScenarioSpec
from .world import (BOUND, DEAD, EXTINCT, FATAL, QUIESCENT, Death, Switch, link_of,
                    new_world)

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

AVAILABLE = njit is not None

# engine return codes
_DONE, _MISS, _GROW_KEYS, _GROW_SWITCHES = 0, 1, 2, 3
# termination codes
_T_QUIESCENT, _T_EXTINCT, _T_BOUND, _T_FATAL = 1, 2, 3, 4
_TERMINATION = {_T_QUIESCENT: QUIESCENT, _T_EXTINCT: EXTINCT, _T_BOUND: BOUND,
                _T_FATAL: FATAL}
_STATUS = ("alive", "dead", "halted")

_SIDE = {None: 0, LEFT: 1, RIGHT: 2}


def _jit(fn):
    return njit(cache=True)(fn) if AVAILABLE else fn


@_jit
def _hash(buf, m):
    h = np.uint64(1469598103934665603)
    for i in range(m):
        h = (h ^ np.uint64(buf[i] + 2)) * np.uint64(1099511628211)
    return np.int64(h >> np.uint64(2))


@_jit
def _find(slots, kbuf, koff, klen, key, m, h):
    """Entry index of ``key`` or -(slot + 1) of the free slot to use."""
    mask = slots.shape[0] - 1
    i = h & mask
    while True:
        e = slots[i]
        if e < 0:
            return -(i + 1)
        if klen[e] == m:
            o = koff[e]
            same = True
            for j in range(m):
                if kbuf[o + j] != key[j]:
                    same = False
                    break
            if same:
                return e
        i = (i + 1) & mask


@_jit
def _rehash(slots, kbuf, koff, klen, count):
    slots[:] = -1
    mask = slots.shape[0] - 1
    for e in range(count):
        i = _hash(kbuf[koff[e]:koff[e] + klen[e]], klen[e]) & mask
        while slots[i] >= 0:
            i = (i + 1) & mask
        slots[i] = e


@_jit
def _snap_equal(snaps, r, cur):
    for j in range(cur.shape[0]):
        if snaps[r, j] != cur[j]:
            return False
    return True


@_jit
def _engine(n, bh, movable, budget, bound,
            loc, st, car, lcw, status, arr, tokens, marks,
            a_tok, a_move, a_mark, a_halt, a_flip, fam, fault,
            slots, kbuf, koff, klen, kval,
            hslots, snaps, sw, swn, deaths, dn, mev, mn, ctl, misskey):
    """Run until termination or until Python must step in.

    ``ctl`` = [round, termination, period, miss agent, miss key length, miss hash].
    """
    k = loc.shape[0]
    head = np.empty(n, np.int64)
    link = np.empty(k, np.int64)
    nxt = np.empty(k, np.int64)
    mover = np.zeros(k, np.int64)
    key = np.empty(6 + 2 * k, np.int64)
    codes = np.empty(k, np.int64)
    puts = np.zeros(n, np.int64)
    picks = np.zeros(n, np.int64)
    cur = np.empty(snaps.shape[1], np.int64)
    hmask = hslots.shape[0] - 1

    while True:
        rnd = ctl[0]
        # Look + Compute
        head[:] = -1
        for a in range(k):
            if status[a] != 1:
                link[a] = head[loc[a]]
                head[loc[a]] = a
        for a in range(k):
            if status[a] != 0:
                continue
            v = loc[a]
            m = 0
            b = head[v]
            while b >= 0:
                if b != a:
                    c = st[b] * 2 + (1 if lcw[b] == lcw[a] else 0)
                    dup = False
                    for j in range(m):
                        if codes[j] == c:
                            dup = True
                            break
                    if not dup:
                        codes[m] = c
                        m += 1
                b = link[b]
            codes[:m].sort()
            key[0] = st[a]
            key[1] = tokens[v]
            if arr[a] == 0:
                key[2] = 0
            else:
                # arrival side: Left iff it came in through its Left port
                key[2] = 1 if (arr[a] == 1) == (lcw[a] == 1) else 2
            key[3] = car[a]
            cwm = marks[v, 0] == 1 or marks[(v - 1) % n, 1] == 1
            ccwm = marks[v, 1] == 1 or marks[(v + 1) % n, 0] == 1
            if lcw[a] == 1:
                key[4] = 1 if cwm else 0
                key[5] = 1 if ccwm else 0
            else:
                key[4] = 1 if ccwm else 0
                key[5] = 1 if cwm else 0
            for j in range(m):
                key[6 + j] = codes[j]
            klen_a = 6 + m
            h = _hash(key, klen_a)
            e = _find(slots, kbuf, koff, klen, key, klen_a, h)
            if e < 0:
                ctl[3] = a
                ctl[4] = klen_a
                ctl[5] = h
                misskey[:klen_a] = key[:klen_a]
                return _MISS
            nxt[a] = kval[e]

        need = 0
        for a in range(k):
            if status[a] == 0 and fam[st[a]] != fam[nxt[a]]:
                need += 1
        if swn[0] + need > sw.shape[0]:
            return _GROW_SWITCHES

        # Move stage: validate first, nothing is touched on a fault
        puts[:] = 0
        picks[:] = 0
        bad = False
        for a in range(k):
            if status[a] != 0:
                continue
            t = a_tok[nxt[a]]
            if t == 1:
                if car[a] < 1:
                    bad = True
                puts[loc[a]] += 1
            elif t == 2:
                if not movable or car[a] >= budget:
                    bad = True
                picks[loc[a]] += 1
        if not bad:
            for v in range(n):
                if picks[v] > tokens[v] or tokens[v] + puts[v] - picks[v] > 2:
                    bad = True
        if not bad:
            for a in range(k):
                if status[a] != 0 or a_move[nxt[a]] == 0:
                    continue
                lc = lcw[a] ^ a_flip[nxt[a]]
                g = -1 if (a_move[nxt[a]] == 1) == (lc == 1) else 1
                v = loc[a]
                if g == -1:
                    crossed = marks[v, 0] == 1 or marks[(v - 1) % n, 1] == 1
                else:
                    crossed = marks[v, 1] == 1 or marks[(v + 1) % n, 0] == 1
                if crossed:
                    bad = True
        if bad:
            ctl[1] = 4
            return _DONE

        rnd += 1
        for v in range(n):
            tokens[v] += puts[v] - picks[v]
        for a in range(k):
            mover[a] = 0
            if status[a] != 0:
                continue
            mover[a] = 1
            s = nxt[a]
            if a_flip[s]:
                lcw[a] ^= 1
            if a_tok[s] == 1:
                car[a] -= 1
            elif a_tok[s] == 2:
                car[a] += 1
            if a_mark[s] != 0:
                g = -1 if (a_mark[s] == 1) == (lcw[a] == 1) else 1
                col = 0 if g == -1 else 1
                if marks[loc[a], col] == 0:
                    marks[loc[a], col] = 1
                    i = mn[0]
                    mev[i, 0] = rnd
                    mev[i, 1] = loc[a]
                    mev[i, 2] = g
                    mn[0] = i + 1
            if fam[st[a]] != fam[s]:
                i = swn[0]
                sw[i, 0] = rnd
                sw[i, 1] = loc[a]
                sw[i, 2] = a
                sw[i, 3] = st[a]
                sw[i, 4] = s
                sw[i, 5] = lcw[a]
                swn[0] = i + 1
            st[a] = s
            if a_halt[s]:
                status[a] = 2
            if a_move[s] == 0:
                arr[a] = 0
        for a in range(k):
            s = st[a]
            if mover[a] == 0 or a_move[s] == 0:
                continue
            g = -1 if (a_move[s] == 1) == (lcw[a] == 1) else 1
            origin = loc[a]
            loc[a] = (origin + g) % n
            arr[a] = g
            if loc[a] == bh:
                status[a] = 1
                i = dn[0]
                deaths[i, 0] = rnd
                deaths[i, 1] = a
                deaths[i, 2] = s
                deaths[i, 3] = origin
                deaths[i, 4] = g
                deaths[i, 5] = car[a]
                dn[0] = i + 1
                car[a] = 0
        ctl[0] = rnd

        # termination, in the reference order
        alive = 0
        present = 0
        for a in range(k):
            if status[a] != 1:
                present += 1
                if st[a] == fault:
                    ctl[1] = 4
                    return _DONE
            if status[a] == 0:
                alive += 1
        if present == 0:
            ctl[1] = 2
            return _DONE
        _snapshot(loc, st, car, lcw, status, arr, tokens, marks, cur)
        h = _hash(cur, cur.shape[0])
        i = h & hmask
        while hslots[i] >= 0:
            r = hslots[i]
            if _snap_equal(snaps, r, cur):
                ctl[1] = 1
                ctl[2] = rnd - r
                return _DONE
            i = (i + 1) & hmask
        hslots[i] = rnd
        snaps[rnd, :] = cur
        if alive == 0:
            ctl[1] = 1
            ctl[2] = 1
            return _DONE
        if rnd >= bound:
            ctl[1] = 3
            return _DONE


@_jit
def _snapshot(loc, st, car, lcw, status, arr, tokens, marks, cur):
    k = loc.shape[0]
    j = 0
    for a in range(k):
        cur[j] = status[a]
        cur[j + 1] = loc[a]
        cur[j + 2] = st[a]
        cur[j + 3] = car[a]
        cur[j + 4] = lcw[a]
        cur[j + 5] = arr[a]
        j += 6
    n = tokens.shape[0]
    for v in range(n):
        cur[j] = tokens[v]
        cur[j + 1] = marks[v, 0]
        cur[j + 2] = marks[v, 1]
        j += 3


@_jit
def _seed_history(hslots, snaps, cur):
    h = _hash(cur, cur.shape[0])
    i = h & (hslots.shape[0] - 1)
    hslots[i] = 0
    snaps[0, :] = cur


class CompiledAutomaton:
    """Integer tables for one automaton plus its growing transition memo."""

    def __init__(self, automaton: Automaton):
        self.automaton = automaton
        names = sorted(automaton.states)
        self.names = names
        self.index = {s: i for i, s in enumerate(names)}
        S = len(names)
        self.a_tok = np.zeros(S, np.int64)
        self.a_move = np.zeros(S, np.int64)
        self.a_mark = np.zeros(S, np.int64)
        self.a_halt = np.zeros(S, np.int64)
        self.a_flip = np.zeros(S, np.int64)
        fams = {}
        self.fam = np.zeros(S, np.int64)
        for i, s in enumerate(names):
            sd = automaton.state_def(s)
            self.fam[i] = fams.setdefault(s.split(".", 1)[0].split("+", 1)[0], len(fams))
            act = sd.action
            if act is None:
                continue
            self.a_tok[i] = {"put": 1, "pick": 2}.get(act.token_op, 0)
            self.a_move[i] = _SIDE[act.move]
            self.a_mark[i] = _SIDE[act.mark]
            self.a_halt[i] = int(act.halt)
            self.a_flip[i] = int(act.flip)
        self.fault = self.index[FAULT]
        self.slots = np.full(1 << 12, -1, np.int64)
        self.kbuf = np.zeros(1 << 16, np.int64)
        self.koff = np.zeros(1 << 11, np.int64)
        self.klen = np.zeros(1 << 11, np.int64)
        self.kval = np.zeros(1 << 11, np.int64)
        self.count = 0
        self.used = 0

    def insert(self, key: np.ndarray, h: int, value: int) -> None:
        m = key.shape[0]
        if self.count + 1 > self.slots.shape[0] // 2:
            self.slots = np.full(self.slots.shape[0] * 2, -1, np.int64)
            _rehash(self.slots, self.kbuf, self.koff, self.klen, self.count)
        if self.count >= self.koff.shape[0]:
            size = self.koff.shape[0] * 2
            self.koff = np.resize(self.koff, size)
            self.klen = np.resize(self.klen, size)
            self.kval = np.resize(self.kval, size)
        if self.used + m > self.kbuf.shape[0]:
            self.kbuf = np.resize(self.kbuf, max(2 * self.kbuf.shape[0], self.used + m))
        e = _find(self.slots, self.kbuf, self.koff, self.klen, key, m, h)
        assert e < 0, "inserting a key twice"
        self.kbuf[self.used:self.used + m] = key
        self.koff[self.count] = self.used
        self.klen[self.count] = m
        self.kval[self.count] = value
        self.slots[-e - 1] = self.count
        self.count += 1
        self.used += m


@dataclass
class RunSummary:
    """The verifier-facing part of a run, without per-round detail."""

    spec: Optional[ScenarioSpec]
    n: int
    black_hole: int
    rounds_used: int
    termination: str
    period: int
    deaths: list
    final_marks: tuple
    final_status: tuple
    _switches: list
    _marks: list

    def marked_links(self) -> frozenset:
        return frozenset(link_of(self.n, v, g) for v, g in self.final_marks)

    def survivors(self) -> int:
        return sum(1 for s in self.final_status if s != DEAD)

    def switches(self) -> list:
        return self._switches

    def mark_events(self) -> list:
        return self._marks


_compiled: dict = {}


def compiled(automaton: Automaton) -> CompiledAutomaton:
    c = _compiled.get(id(automaton))
    if c is None or c.automaton is not automaton:
        c = _compiled[id(automaton)] = CompiledAutomaton(automaton)
    return c


def run_fast(spec: ScenarioSpec, automaton: Automaton,
             round_bound: Optional[int] = None) -> RunSummary:
    """Same run as ``world.run`` (for the verifier's purposes), much faster."""
    if not AVAILABLE:
        raise RuntimeError("numba is not installed")
    world = new_world(spec, automaton)
    bound = spec.bound if round_bound is None else round_bound
    if bound < 1:
        raise ValueError("round_bound must be >= 1")
    c = compiled(automaton)
    n, k = world.n, len(world.agents)
    ag = world.agents
    loc = np.array([a.location for a in ag], np.int64)
    st = np.array([c.index[a.state] for a in ag], np.int64)
    car = np.array([a.carried for a in ag], np.int64)
    lcw = np.array([int(a.left_cw) for a in ag], np.int64)
    status = np.zeros(k, np.int64)
    arr = np.zeros(k, np.int64)
    tokens = np.zeros(n, np.int64)
    marks = np.zeros((n, 2), np.int64)
    width = 6 * k + 3 * n
    hsize = 1 << max(4, (2 * bound + 4).bit_length())
    hslots = np.full(hsize, -1, np.int64)
    snaps = np.zeros((bound + 1, width), np.int64)
    sw = np.zeros((16 * k + 64, 6), np.int64)
    swn = np.zeros(1, np.int64)
    deaths = np.zeros((k, 6), np.int64)
    dn = np.zeros(1, np.int64)
    mev = np.zeros((2 * n, 3), np.int64)
    mn = np.zeros(1, np.int64)
    ctl = np.zeros(6, np.int64)
    misskey = np.zeros(6 + 2 * k, np.int64)
    cur = np.zeros(width, np.int64)
    _snapshot(loc, st, car, lcw, status, arr, tokens, marks, cur)
    _seed_history(hslots, snaps, cur)

    while True:
        code = _engine(n, world.black_hole, world.movable, world.budget, bound,
                       loc, st, car, lcw, status, arr, tokens, marks,
                       c.a_tok, c.a_move, c.a_mark, c.a_halt, c.a_flip, c.fam, c.fault,
                       c.slots, c.kbuf, c.koff, c.klen, c.kval,
                       hslots, snaps, sw, swn, deaths, dn, mev, mn, ctl, misskey)
        if code == _DONE:
            break
        if code == _GROW_SWITCHES:
            sw = np.concatenate([sw, np.zeros_like(sw)])
            continue
        a = int(ctl[3])
        p = _percept(c, a, loc, st, car, lcw, status, arr, tokens, marks, n)
        target = c.automaton.transition(c.names[st[a]], p)
        c.insert(misskey[:ctl[4]].copy(), int(ctl[5]), c.index[target])

    names = c.names
    final_marks = tuple(sorted((v, -1 if col == 0 else 1)
                               for v in range(n) for col in (0, 1) if marks[v, col]))
    return RunSummary(
        spec=spec, n=n, black_hole=world.black_hole, rounds_used=int(ctl[0]),
        termination=_TERMINATION[int(ctl[1])], period=int(ctl[2]),
        deaths=[Death(int(r), int(a), names[s], int(o), int(g), int(cr))
                for r, a, s, o, g, cr in deaths[:dn[0]]],
        final_marks=final_marks,
        final_status=tuple(_STATUS[s] for s in status),
        _switches=[Switch(int(r), int(v), int(a), names[b], names[x], bool(l))
                   for r, v, a, b, x, l in sw[:swn[0]]],
        _marks=[(int(r), int(v), int(g)) for r, v, g in mev[:mn[0]]],
    )


def _percept(c, a, loc, st, car, lcw, status, arr, tokens, marks, n) -> Percept:
    v = int(loc[a])
    others = frozenset((c.names[st[b]], bool(lcw[b] == lcw[a]))
                       for b in range(len(loc)) if b != a and status[b] != 1 and loc[b] == v)
    left_cw = bool(lcw[a])
    arrival = None if arr[a] == 0 else side_of(-int(arr[a]), left_cw)
    cwm = bool(marks[v, 0] or marks[(v - 1) % n, 1])
    ccwm = bool(marks[v, 1] or marks[(v + 1) % n, 0])
    ld, rd = (cwm, ccwm) if left_cw else (ccwm, cwm)
    return Percept(others, int(tokens[v]), arrival, int(car[a]), ld, rd)
