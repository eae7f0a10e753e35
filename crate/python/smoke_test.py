"""Smoke test for the `bhs` extension module.

Build and place the module next to this script first:

    cargo build --release -p bhs-py --features extension-module
    cp target/release/libbhs_py.so python/bhs.so
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import bhs  # noqa: E402


def main():
    ring = bhs.Ring(8, 0)
    assert (ring.n, ring.bh_index) == (8, 0)

    out = bhs.run(n=8, starts=[1, 3, 5], adversary="frontier_blocker(release=8)")
    assert out.solved and out.clean, out.violations
    verdict = bhs.verify(out.trace_jsonl)
    assert verdict == out.verdict
    assert verdict["stats"]["deaths"] >= 1

    diagram = bhs.render(out.trace_jsonl)
    assert diagram.startswith("n=8 bh=0 starts=[1, 3, 5]")
    assert out.render("svg").startswith("<svg")

    replay = bhs.run(
        "n = 8\nstarts = \"1,3,5\"\nadversary = \"schedule\"\n",
        schedule=",".join("-" if e is None else str(e) for e in out.schedule()),
    )
    assert replay.trace_jsonl.splitlines()[1:] == out.trace_jsonl.splitlines()[1:]

    world = bhs.World(6, 0, [2, 2, 2], protocol="cautious_pendulum")
    events = world.step()
    assert any(e["kind"] == "Round" for e in events)
    assert world.roles == ["Retroguard", "Leader", "Avanguard"]
    while not world.quiescent and world.round < 2000:
        world.step(missing=None if world.round % 3 else 1)
    assert 0 in world.reports
    assert all(r in (None, 0) for r in world.reports)

    summary = bhs.sweep('ns = "4..6"\nadversaries = "static, pendulum_staller"\n')
    assert summary["failures"] == [] and summary["runs"] == summary["solved"]
    assert bhs.fuzz(seed=1, count=30, n_max=9)["failures"] == []
    report = bhs.enumerate(ns="4", depth=4)
    assert report["counterexamples"] == []

    try:
        bhs.run(n=3)
    except ValueError:
        pass
    else:
        raise AssertionError("n=3 accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
