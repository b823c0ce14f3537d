import io
import json

import pytest

from bhsring.scenario import ScenarioSpec
from bhsring.traceio import (TraceFormatError, dumps_trace, read_trace, replay, simulate,
                             write_trace)
from bhsring.verifier import judge


@pytest.mark.parametrize("spec", [
    ScenarioSpec(10, 0, (3, 6, 9), "ring1"),
    ScenarioSpec(9, 4, (0, 2, 6, 7), "ring2"),
    ScenarioSpec(11, 0, (1, 2, 5, 7, 9), "ring3", oriented=False,
                 labeling=(1, 2, 2, 1, 1, 2, 1, 2, 2, 1, 1)),
    ScenarioSpec(6, 0, (2, 4), "ring1", oriented=False, labeling=(1, 1, 2, 1, 2, 2)),
])
def test_round_trip(spec):
    t = simulate(spec)
    text = dumps_trace(t)
    back, stored = read_trace(io.StringIO(text))
    assert dumps_trace(back) == text
    assert stored == judge(t) == judge(back)
    fresh, identical = replay(back)
    assert identical and judge(fresh) == stored


def test_header_is_self_describing():
    spec = ScenarioSpec(8, 0, (2, 5, 7), "ring1", round_bound=50)
    buf = io.StringIO()
    write_trace(simulate(spec), buf)
    lines = buf.getvalue().splitlines()
    head = json.loads(lines[0])
    assert ScenarioSpec.from_dict(head["spec"]) == spec
    assert all(json.loads(ln)["type"] == "round" for ln in lines[1:-1])
    assert json.loads(lines[-1])["type"] == "end"


def test_tampered_trace_is_not_identical():
    spec = ScenarioSpec(8, 0, (2, 5, 7), "ring1")
    lines = dumps_trace(simulate(spec)).splitlines()
    end = json.loads(lines[-1])
    end["final_status"] = ["halted"] * len(end["final_status"])
    lines[-1] = json.dumps(end)
    back, _ = read_trace(io.StringIO("\n".join(lines)))
    assert replay(back)[1] is False


@pytest.mark.parametrize("text", [
    "",
    "not json\n",
    '{"type": "round"}\n',
    '{"type": "header", "format": "other/9"}\n{"type": "end"}\n',
])
def test_malformed(text):
    with pytest.raises(TraceFormatError):
        read_trace(io.StringIO(text))


def test_truncated():
    lines = dumps_trace(simulate(ScenarioSpec(8, 0, (2, 5, 7)))).splitlines()
    with pytest.raises(TraceFormatError):
        read_trace(io.StringIO("\n".join(lines[:-1])))
