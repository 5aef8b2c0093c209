"""Smoke test for the ariel_adapt extension module.

Builds the extension with cargo (unless ARIEL_ADAPT_LIB points at a built
library), copies it next to this script as ariel_adapt.so, imports it and
exercises each exposed operation. Exits non-zero on the first failure.
"""

import glob
import json
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIXTURES = os.path.join(ROOT, "fixtures")


def build_library():
    lib = os.environ.get("ARIEL_ADAPT_LIB")
    if lib:
        return lib
    subprocess.run(
        ["cargo", "build", "--release", "-p", "ariel-adapt-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    candidates = glob.glob(os.path.join(ROOT, "target", "release", "libariel_adapt_py.*"))
    candidates = [c for c in candidates if c.endswith((".so", ".dylib"))]
    if not candidates:
        sys.exit("built library not found under target/release")
    return candidates[0]


def import_module(lib):
    staging = tempfile.mkdtemp(prefix="ariel_adapt_")
    shutil.copy(lib, os.path.join(staging, "ariel_adapt.so"))
    sys.path.insert(0, staging)
    import ariel_adapt

    return ariel_adapt


def check_tuple_space(aa):
    space = aa.TupleSpace()
    space.register_producer("P0")
    space.register_producer("P1")
    space.add_station(1)
    first = space.out("P0", "cpu_usage_pct", ["station#1", 42.0])
    space.out("P1", "note", ["hello", 3, True])
    assert len(space) == 2
    hit = space.rd("cpu_usage_pct", ["station#1", "?real"])
    assert hit["id"] == first and hit["values"] == ["station#1", 42.0], hit
    assert space.rd("note", [None, None]) is None
    try:
        space.take("P0", "note", [None, None, None])
    except ValueError as e:
        assert "belongs to" in str(e), e
    else:
        raise AssertionError("non-producer take succeeded")
    taken = space.take("P1", "note", ["?text", 3, True])
    assert taken["producer"] == "P1"
    assert len(space) == 1
    return space


def check_program(aa, space):
    with open(os.path.join(FIXTURES, "program0.ariel")) as f:
        prog = aa.Program.compile(f.read(), "program0")
    assert len(prog) == 15, len(prog)
    again = aa.Program.from_acode(prog.to_acode())
    assert again.triplets == prog.triplets
    assert "ACT_ALARM GLOBAL" in prog.disassemble()
    effects = prog.execute(space)
    assert [e["kind"] for e in effects] == [{"set_param": {"name": "power_mode", "value": {"text": "normal"}}}], effects


def check_pareto(aa):
    pts = [
        ("a", {"x": 1.0, "y": 5.0}),
        ("b", {"x": 3.0, "y": 3.0}),
        ("c", {"x": 2.0, "y": 2.0}),
    ]
    assert aa.pareto_front(pts, maximize=["x", "y"]) == ["a", "b"]
    text = aa.pareto_scenarios(pts, {"x": 0.5, "y": 0.5}, maximize=["x", "y"])
    assert text.splitlines()[-1] == "SCENARIO Otherwise TRUE", text


def check_voting(aa):
    assert aa.vote(["alerting", "normal", "unreachable"], 1)
    assert not aa.vote(["alerting", "normal", "normal"], 2)
    assert aa.vote(["unreachable"] * 3, 3)
    assert aa.classify(72, 36.8, 120) == "mild"
    rows = aa.voting_sweep(intervals=400)
    fixed = [r for r in rows if r["policy"]["policy"] == "fixed"]
    assert len(fixed) == 5
    misses = [r["miss_rate"] for r in fixed]
    alarms = [r["false_alarm_rate"] for r in fixed]
    assert misses == sorted(misses) and alarms == sorted(alarms, reverse=True), rows


def check_sim(aa):
    with open(os.path.join(FIXTURES, "two_scenarios.json")) as f:
        config = f.read()
    out = aa.run_sim(config, until=600, base_dir=FIXTURES)
    assert out["scenario"] == "CPU_OK"
    alarms = [e for e in out["trace"] if e["record"] == "op" and e["tag"] == "system_alarm"]
    assert alarms and alarms[0]["time"] == 500, alarms
    loop = json.dumps(
        {
            "seed": 1,
            "stations": 1,
            "cascade_cap": 10,
            "scenarios": [{"name": "Otherwise", "source": "IF TRUE THEN EMIT ping (1) FI"}],
            "emissions": [{"time": 1, "producer": "LM", "tag": "kick", "values": [{"int": 1}]}],
        }
    )
    try:
        aa.run_sim(loop, until=5)
    except RuntimeError as e:
        assert "cascade" in str(e), e
    else:
        raise AssertionError("runaway program did not halt")


def main():
    aa = import_module(build_library())
    space = check_tuple_space(aa)
    check_program(aa, space)
    check_pareto(aa)
    check_voting(aa)
    check_sim(aa)
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
