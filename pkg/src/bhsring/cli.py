"""Command-line front end.

    bhsring run --protocol ring1 --n 10 --bh 0 --homebases 3,6,9
    bhsring sweep --protocol ring3 --n 6..9 --exhaustive
    bhsring adversary --protocol ring1 --agents 2 --nmax 20
    bhsring theorem --theorem thm3 --t 1 --x 1 --y 1
    bhsring dump-fsm --protocol ring2
    bhsring replay trace.jsonl

Exit status: 0 on success, 1 when a verdict fails (or, for ``adversary``,
when a failing scenario is found), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional

from . import __version__
from .harness import (ENGINES, EXHAUSTIVE, THEOREMS, Sampled, adversary_search,
                      enumerate_scenarios, sweep, theorem_scenario)
from .protocols import BUILDERS, get_automaton
from .scenario import InvalidSpec, ScenarioSpec
from .traceio import TraceFormatError, read_trace, replay, simulate, write_trace
from .verifier import check_properties, judge
from .world import DEAD, Trace

log = logging.getLogger("bhsring")

# protocols that default to arbitrary port labelings
DEFAULT_UNORIENTED = {"ring3"}


class UsageError(Exception):
    pass


def _range(text: str) -> tuple:
    """``"6..9"`` -> (6, 9); ``"7"`` -> (7, 7)."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            r = (int(lo), int(hi))
        else:
            r = (int(text), int(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or LO..HI, got {text!r}")
    if r[0] > r[1]:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return r


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _labeling(text: str) -> tuple:
    text = text.replace(",", "").replace(" ", "")
    if not text or set(text) - {"1", "2"}:
        raise argparse.ArgumentTypeError("labeling is a string of 1s and 2s, one per node")
    return tuple(int(c) for c in text)


def _protocol(text: str) -> str:
    if text not in BUILDERS:
        raise argparse.ArgumentTypeError(
            f"unknown protocol {text!r}; choose from {', '.join(sorted(BUILDERS))}")
    return text


def _add_orientation(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--oriented", dest="oriented", action="store_true", default=None,
                   help="consistent port labels (port 1 clockwise everywhere)")
    g.add_argument("--unoriented", dest="oriented", action="store_false",
                   help="arbitrary port labels")


def _add_tokens(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tokens", type=int, help="override the per-agent token budget")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--movable", dest="movable", action="store_true", default=None,
                   help="placed tokens can be picked up again")
    g.add_argument("--unmovable", dest="movable", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bhsring",
        description="Synchronous black hole search in rings: simulate, sweep, search.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("run", help="simulate one scenario and print its trace")
    p.add_argument("--protocol", type=_protocol, default="ring1")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--bh", type=int, required=True, help="black hole node")
    p.add_argument("--homebases", type=_int_list, required=True)
    p.add_argument("--labeling", type=_labeling,
                   help="port label of the clockwise port at each node, e.g. 1121")
    _add_orientation(p)
    _add_tokens(p)
    p.add_argument("--bound", type=int, help="round bound (default 30n+30)")
    p.add_argument("--format", choices=("human", "structured"), default="human")
    p.add_argument("--out", help="write the trace here instead of stdout")

    p = sub.add_parser("sweep", help="run and judge a family of scenarios")
    p.add_argument("--protocol", type=_protocol, required=True)
    p.add_argument("--n", type=_range, required=True, metavar="LO..HI")
    p.add_argument("--agents", type=_range, metavar="LO..HI",
                   help="agent counts (default: protocol minimum to n-1)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", action="store_true",
                      help="every placement, and every labeling when unoriented (default)")
    mode.add_argument("--sampled", action="store_true",
                      help="seeded sample of placements x labelings per n")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--labelings", type=int, default=256)
    p.add_argument("--placements", type=int, default=256)
    _add_orientation(p)
    _add_tokens(p)
    p.add_argument("--bound", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--engine", choices=ENGINES, default="auto")
    p.add_argument("--format", choices=("human", "structured"), default="human")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--traces", help="directory for traces of failing exemplars")

    p = sub.add_parser(
        "adversary",
        help="search for the first failing scenario",
        description="Walk scenarios in (n, placement, labeling) order and report the "
                    "first one the protocol fails.  Exit status 1 means a failing "
                    "scenario was found, 0 that none exists up to --nmax.")
    p.add_argument("--protocol", type=_protocol, required=True)
    p.add_argument("--agents", type=int, required=True)
    p.add_argument("--nmax", type=int, default=20)
    p.add_argument("--nmin", type=int)
    _add_orientation(p)
    _add_tokens(p)
    p.add_argument("--bound", type=int)
    p.add_argument("--format", choices=("human", "structured"), default="human")
    p.add_argument("--out", help="write the counterexample trace here")

    p = sub.add_parser("theorem", help="run a lower-bound construction")
    p.add_argument("--theorem", choices=THEOREMS, required=True)
    for name in ("k", "p", "t", "x", "y"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--protocol", type=_protocol,
                   help="automaton to run (default: the restricted one for the theorem)")
    _add_tokens(p)
    p.add_argument("--bound", type=int)
    p.add_argument("--format", choices=("human", "structured"), default="human")
    p.add_argument("--out", help="write the JSON results here")

    p = sub.add_parser("dump-fsm", help="print a protocol's state machine")
    p.add_argument("--protocol", type=_protocol, action="append",
                   help="may be repeated (default: all)")
    p.add_argument("--out", help="write here instead of stdout")

    p = sub.add_parser("replay", help="rerun a stored trace and compare")
    p.add_argument("trace", help="trace file written by run or sweep --traces")
    p.add_argument("--format", choices=("human", "structured"), default="human")
    return ap


# ---------------------------------------------------------------- rendering

def ring_strip(trace: Trace) -> str:
    """Fixed-width ring diagram, one line per round.

    Each node is ``<tokens><agents>``: tokens as ``.``/1/2, agents as a count
    (blank when empty); the black hole is ``BH``.  ``#`` between two nodes is a
    marked link, ``-`` an open one.
    """
    n, bh = trace.n, trace.black_hole
    spec = trace.spec
    tokens = [0] * n
    loc = {i: h for i, h in enumerate(spec.homebases)} if spec else {}
    status = {i: "alive" for i in loc}
    states = {i: "" for i in loc}
    marks: set = set()
    lines = ["round " + " ".join(f"{v:>2}" for v in range(n))]

    def row(label: str) -> str:
        cells = []
        for v in range(n):
            if v == bh:
                cells.append("BH")
                continue
            k = sum(1 for i, x in loc.items() if x == v and status[i] != DEAD)
            cells.append(("." if not tokens[v] else str(tokens[v])) + (str(k) if k else " "))
        out = []
        for v in range(n):
            out.append(cells[v])
            link = tuple(sorted((v, (v + 1) % n)))
            out.append("#" if link in marks else "-")
        who = " ".join(f"a{i}:{states[i]}@{loc[i]}" + ("" if status[i] == "alive"
                                                      else f"({status[i]})")
                       for i in sorted(loc) if states[i])
        return f"{label:>5} " + "".join(out) + ("  " + who if who else "")

    lines.append(row("0"))
    for rec in trace.rounds:
        for v, d in rec.token_deltas:
            tokens[v] += d
        for v, g in rec.marks_added:
            marks.add(tuple(sorted((v, (v + g) % n))))
        for s in rec.steps:
            loc[s.agent] = s.location
            status[s.agent] = s.status
            states[s.agent] = s.after
        lines.append(row(str(rec.round)))
    return "\n".join(lines) + "\n"


def _verdict_line(trace) -> str:
    v = judge(trace)
    tail = "" if v.ok else f" ({v.failure_reason})"
    marks = ", ".join(f"{a}-{b}" for a, b in v.marked_links) or "none"
    return (f"verdict: {v.outcome}{tail}; rounds {v.rounds_used}; dead {v.dead_count}; "
            f"marked links: {marks}; termination {trace.termination}")


def _spec_from_args(args, protocol: Optional[str] = None) -> ScenarioSpec:
    oriented = args.oriented
    if oriented is None:
        oriented = args.labeling is None
    if not oriented and args.labeling is None:
        raise UsageError("--unoriented needs --labeling")
    if oriented and args.labeling is not None:
        raise UsageError("--labeling only applies to unoriented rings")
    return ScenarioSpec(args.n, args.bh, tuple(sorted(args.homebases)),
                        protocol or args.protocol, oriented, args.labeling, args.bound,
                        args.tokens, args.movable)


def _open_out(path: Optional[str]):
    return open(path, "w") if path else sys.stdout


# ---------------------------------------------------------------- commands

def cmd_run(args) -> int:
    spec = _spec_from_args(args)
    spec.validate()
    trace = simulate(spec)
    fp = _open_out(args.out)
    try:
        if args.format == "structured":
            write_trace(trace, fp)
        else:
            fp.write(ring_strip(trace))
    finally:
        if args.out:
            fp.close()
    quiet = args.format == "structured" and not args.out
    print(_verdict_line(trace), file=sys.stderr if quiet else sys.stdout)
    for msg in check_properties(trace, spec.protocol):
        print(f"property: {msg}", file=sys.stderr)
    return 0 if judge(trace).ok else 1


def cmd_sweep(args) -> int:
    oriented = args.oriented
    if oriented is None:
        oriented = args.protocol not in DEFAULT_UNORIENTED
    info = get_automaton(args.protocol).info
    k_range = args.agents or (info.min_agents, 10 ** 6)
    mode = Sampled(args.seed, args.labelings, args.placements) if args.sampled else EXHAUSTIVE
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    scen = enumerate_scenarios(args.protocol, args.n, k_range, mode, oriented=oriented,
                               round_bound=args.bound, tokens=args.tokens,
                               movable=args.movable)
    report = sweep(args.protocol, scen, jobs=args.jobs, engine=args.engine)
    text = report.to_json()
    if args.out:
        with open(args.out, "w") as fp:
            fp.write(text)
    if args.format == "structured":
        if not args.out:
            sys.stdout.write(text)
    else:
        d = report.to_dict()
        print(f"{args.protocol}: {report.scenarios} scenarios, {report.runs} runs, "
              f"{d['verdicts'].get('success', 0)} success, {report.failures} failure")
        for reason, c in d["failure_reasons"].items():
            print(f"  {reason}: {c}")
        for kind, c in d["property_violations"].items():
            print(f"  property: {kind}: {c}")
        print(f"  max rounds by n: {d['max_rounds']}")
        print(f"  slope {d['round_slope']}; within 30n+30: {d['within_bound']}")
    if args.traces and (report.exemplars or report.violating):
        os.makedirs(args.traces, exist_ok=True)
        specs = [s for s, _ in report.exemplars] + [s for s, _ in report.violating]
        for i, s in enumerate(dict.fromkeys(specs)):
            with open(os.path.join(args.traces, f"failure-{i:03d}.jsonl"), "w") as fp:
                write_trace(simulate(s), fp)
    return 0 if report.ok else 1


def cmd_adversary(args) -> int:
    if args.nmax < args.agents + 1:
        raise UsageError("--nmax must be at least --agents + 1")
    found = adversary_search(args.protocol, args.agents, args.tokens, args.movable,
                             args.nmax, oriented=args.oriented, n_min=args.nmin,
                             round_bound=args.bound)
    if found is None:
        print("none")
        return 0
    trace = simulate(found)
    if args.format == "structured":
        print(json.dumps(found.to_dict(), sort_keys=True))
    else:
        print(f"failing scenario: {json.dumps(found.to_dict(), sort_keys=True)}")
        print(_verdict_line(trace))
    if args.out:
        with open(args.out, "w") as fp:
            write_trace(trace, fp)
    return 1


def cmd_theorem(args) -> int:
    params = {k: getattr(args, k) for k in ("k", "p", "t", "x", "y")
              if getattr(args, k) is not None}
    specs = theorem_scenario(args.theorem, protocol=args.protocol, round_bound=args.bound,
                             tokens=args.tokens, movable=args.movable, **params)
    rows = []
    for s in specs:
        trace = simulate(s)
        rows.append({"spec": s.to_dict(), "verdict": judge(trace).to_dict()})
        if args.format == "human":
            lab = "" if s.labeling is None else " ports " + "".join(
                str(s.labeling[h]) for h in s.homebases)
            print(f"{args.theorem} n={s.n} homebases={list(s.homebases)}{lab} "
                  f"[{s.protocol}]: {_verdict_line(trace)}")
    if args.format == "structured" or args.out:
        text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
        if args.out:
            with open(args.out, "w") as fp:
                fp.write(text)
        else:
            sys.stdout.write(text)
    return 0 if all(r["verdict"]["outcome"] == "success" for r in rows) else 1


def cmd_dump(args) -> int:
    names = args.protocol or sorted(BUILDERS)
    text = "\n".join(get_automaton(n).dump() for n in names)
    fp = _open_out(args.out)
    try:
        fp.write(text)
    finally:
        if args.out:
            fp.close()
    return 0


def cmd_replay(args) -> int:
    with open(args.trace) as fp:
        stored, stored_verdict = read_trace(fp)
    fresh, identical = replay(stored)
    verdict = judge(fresh)
    same_verdict = verdict == stored_verdict
    if args.format == "structured":
        print(json.dumps({"identical": identical, "same_verdict": same_verdict,
                          "verdict": verdict.to_dict()}, sort_keys=True))
    else:
        print(_verdict_line(fresh))
        print(f"stored verdict reproduced: {'yes' if same_verdict else 'NO'}; "
              f"trace identical: {'yes' if identical else 'NO'}")
    if not (identical and same_verdict):
        return 1
    return 0 if verdict.ok else 1


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "adversary": cmd_adversary,
            "theorem": cmd_theorem, "dump-fsm": cmd_dump, "replay": cmd_replay}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidSpec, TraceFormatError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
