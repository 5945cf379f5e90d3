"""Smoke test for the Python extension.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import json
import math
import pathlib
import subprocess
import sys
import tempfile

import fairgan_py as fg

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    assert fg.jsd([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert abs(fg.jsd([1.0, 0.0], [0.0, 1.0]) - math.log(2)) < 1e-12
    assert fg.risk_difference([1, 1, 0, 0], [1, 1, 0, 0]) == 1.0
    assert fg.balanced_error_rate([1, 0, 1, 0], [1, 1, 0, 0]) == 0.5

    scenario = {
        "lambda": 1.0,
        "outcomes": [
            {"x": x, "y": y, "s": s, "p": 0.25, "g": 0.25}
            for (x, y) in (("a", 0), ("b", 1))
            for s in (0, 1)
        ],
    }
    report = json.loads(fg.evaluate_scenario(json.dumps(scenario)))
    assert abs(report["fairgan"]["value"] + 2 * fg.LOG4) < 1e-12
    assert abs(report["nfgan2_optimum"]["value"] + 3 * fg.LOG4) < 1e-12

    g1, g0, gap = fg.toy_equilibrium(1.0, 2000)
    assert len(g1) == len(g0) == 64
    assert abs(sum(g1) - 1.0) < 1e-9
    assert -2.0 < gap < 0.0

    schema = ROOT / "data" / "adult" / "schema.json"
    data = ROOT / "data" / "adult" / "adult.csv"
    audit = json.loads(fg.audit_csv(str(schema), str(data), attacker=False))
    assert abs(audit["risk_difference"] - 0.1989) < 0.001, audit["risk_difference"]

    try:
        fg.risk_difference([1, 0], [1, 1])
    except ValueError as e:
        assert "empty_group" in str(e) or "group" in str(e)
    else:
        raise AssertionError("expected ValueError")

    with tempfile.TemporaryDirectory() as tmp:
        path = pathlib.Path(tmp) / "scenario.json"
        path.write_text(json.dumps(scenario))
        assert fg.run_cli(["theory", "--scenario", str(path), "--out", str(path.with_suffix(".out.json"))]) == 0
        assert path.with_suffix(".out.json").exists()
        assert fg.run_cli(["train", "--config", str(pathlib.Path(tmp) / "missing.json")]) == 1

    print("python smoke test: ok")


if __name__ == "__main__":
    sys.exit(main())
