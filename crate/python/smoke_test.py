#!/usr/bin/env python3
"""Smoke test for the irblib bindings.

Uses an installed irblib when available; otherwise builds the extension with
cargo and imports it from a staging directory, so `python3 python/smoke_test.py`
works straight from a checkout.
"""

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def load_module():
    try:
        import irblib
        return irblib
    except ImportError:
        pass
    subprocess.run(["cargo", "build", "-p", "irb-py"], cwd=ROOT, check=True)
    staging = Path(tempfile.mkdtemp(prefix="irblib-"))
    shutil.copy2(ROOT / "target" / "debug" / "libirblib.so", staging / "irblib.so")
    sys.path.insert(0, str(staging))
    import irblib
    return irblib


def expect_value_error(fn, what):
    try:
        fn()
    except ValueError:
        return
    raise AssertionError(f"{what} should raise ValueError")


def main():
    irblib = load_module()

    names = irblib.scenario_names()
    assert len(names) == 7 and "exa1" in names and "lp-spike" in names, names

    e = irblib.Expression("x/2 + 1/2")
    assert e.eval(1.0, 0.5) == 0.75
    assert irblib.Expression(e.pretty()).eval(2.0, 0.25) == e.eval(2.0, 0.25)
    expect_value_error(lambda: irblib.Expression("x +"), "parse of `x +`")
    expect_value_error(lambda: irblib.Expression("1/x").eval(1.0, 0.0), "division by zero")

    sc = irblib.Scenario.builtin("exa1")
    assert sc.name == "exa1" and sc.space == "sup"
    assert (sc.a, sc.b, sc.nx, sc.nt) == (0.0, 1.0, 1025, 512)
    sc.nx = 257
    sc.nt = 128
    expect_value_error(lambda: setattr(sc, "nt", 7), "unaligned nt")
    expect_value_error(lambda: setattr(sc, "tol", 0.0), "non-positive tol")

    cert = json.loads(irblib.certify(sc))
    assert cert["type"] == "bounded" and cert["pass"] is True
    assert cert["s"] == 0.5 and 0.95 <= cert["m"] <= 1.0, cert

    res = irblib.solve(sc)
    assert res.converged and res.iterations < 50, repr(res)
    assert len(res.xs) == 257 == len(res.values)
    assert res.values[0] == 0.0
    assert res.bounds is not None and len(res.bounds) == len(res.residuals)
    assert res.residuals[-1] <= sc.tol

    f1 = irblib.apply(sc, [0.0] * sc.nx)
    assert len(f1) == sc.nx and f1[0] == 0.0
    expect_value_error(lambda: irblib.apply(sc, [0.0] * 5), "wrong grid size")

    with tempfile.TemporaryDirectory() as out:
        rr = irblib.run(sc, out)
        assert rr.exit_code == 0, rr.report
        report = json.loads(rr.report)
        assert report["converged"] is True
        assert report["certificate"]["s"] == 0.5
        assert len(rr.written) == 3 and all(Path(p).exists() for p in rr.written)

    par = irblib.Scenario.builtin("parabola")
    discrepancies, worst = irblib.embed_check(par, nt=64, functions=3)
    assert len(discrepancies) == 3 and worst <= 1e-12, (discrepancies, worst)

    study = json.loads(irblib.approx_study(par, ks=[4, 8], nt=64))
    assert [entry["k"] for entry in study["entries"]] == [4, 8]
    assert all(entry["e"] <= entry["bound"] for entry in study["entries"]), study

    round_trip = irblib.Scenario.from_text(par.dump(), name="parabola")
    assert round_trip.dump() == par.dump()

    print("smoke test passed")


if __name__ == "__main__":
    main()
