"""Line-delimited JSON traces and replay.

A trace file is a header record carrying the full scenario, one record per
round, and an end record with the termination data.  The header is enough
to rerun the scenario, which is what ``replay`` does.
"""

from __future__ import annotations

import json
from typing import IO, Iterable, Optional

from .protocols import get_automaton
from .scenario import ScenarioSpec
from .verifier import Verdict, judge
from .world import RoundRecord, Trace, new_world, run

FORMAT = "bhsring-trace/1"


class TraceFormatError(ValueError):
    pass


def trace_records(trace: Trace) -> Iterable[dict]:
    yield {"type": "header", "format": FORMAT,
           "spec": None if trace.spec is None else trace.spec.to_dict(),
           "n": trace.n, "black_hole": trace.black_hole,
           "token_total": trace.token_total}
    for rec in trace.rounds:
        yield rec.to_dict()
    yield {"type": "end", "termination": trace.termination, "fault": trace.fault,
           "period": trace.period, "rounds_used": trace.rounds_used,
           "final_marks": [list(m) for m in trace.final_marks],
           "final_status": list(trace.final_status),
           "verdict": judge(trace).to_dict()}


def write_trace(trace: Trace, fp: IO[str]) -> None:
    for r in trace_records(trace):
        fp.write(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n")


def dumps_trace(trace: Trace) -> str:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n"
                   for r in trace_records(trace))


def read_trace(fp: IO[str]) -> tuple:
    """Parse a trace file; returns ``(trace, stored_verdict)``."""
    lines = [ln for ln in fp.read().splitlines() if ln.strip()]
    if not lines:
        raise TraceFormatError("empty trace")
    try:
        recs = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"bad JSON: {exc}") from exc
    head, end = recs[0], recs[-1]
    if head.get("type") != "header" or head.get("format") != FORMAT:
        raise TraceFormatError("missing or unknown header")
    if end.get("type") != "end":
        raise TraceFormatError("truncated trace: no end record")
    spec = None if head["spec"] is None else ScenarioSpec.from_dict(head["spec"])
    trace = Trace(spec, head["n"], head["black_hole"], token_total=head["token_total"])
    for r in recs[1:-1]:
        if r.get("type") != "round":
            raise TraceFormatError(f"unexpected record type {r.get('type')!r}")
        trace.rounds.append(RoundRecord.from_dict(r))
    trace.termination = end["termination"]
    trace.fault = end["fault"]
    trace.period = end["period"]
    trace.final_marks = tuple(tuple(m) for m in end["final_marks"])
    trace.final_status = tuple(end["final_status"])
    if end["rounds_used"] != trace.rounds_used:
        raise TraceFormatError("round count in end record does not match")
    return trace, Verdict.from_dict(end["verdict"])


def simulate(spec: ScenarioSpec, round_bound: Optional[int] = None) -> Trace:
    return run(new_world(spec), get_automaton(spec.protocol),
               spec.bound if round_bound is None else round_bound)


def replay(trace: Trace) -> tuple:
    """Rerun the scenario in ``trace``'s header.

    Returns ``(fresh_trace, identical)`` where ``identical`` says whether the
    rerun reproduces the stored trace record for record.
    """
    if trace.spec is None:
        raise TraceFormatError("trace header carries no scenario")
    fresh = simulate(trace.spec)
    return fresh, dumps_trace(fresh) == dumps_trace(trace)
