#!/usr/bin/env python3
"""End-to-end checks of the splinebeta command line tool.

Usage: cli_smoke.py <splinebeta binary> <repo root>
"""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

BIN = sys.argv[1]
ROOT = pathlib.Path(sys.argv[2])
SCHEMAS = {p.name.split(".")[0]: json.loads(p.read_text()) for p in (ROOT / "schemas").glob("*.schema.json")}
failures = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def run(*args, expect=0):
    proc = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True)
    if proc.returncode != expect:
        print(proc.stdout, proc.stderr, file=sys.stderr)
    check(proc.returncode == expect, f"exit {expect}: {' '.join(map(str, args))}")
    return proc


def validated(text, schema):
    doc = json.loads(text)
    try:
        jsonschema.validate(doc, SCHEMAS[schema])
        check(True, f"{schema} output validates")
    except jsonschema.ValidationError as e:
        check(False, f"{schema} output validates: {e.message}")
    return doc


def strip_volatile(doc):
    doc = json.loads(json.dumps(doc))
    doc["config"].pop("argv")
    doc["config"]["options"].pop("threads", None)
    doc["config"]["options"].pop("csv", None)
    for panel in doc["result"]["panels"]:
        panel.pop("runtime_seconds")
    return doc


with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)
    panel = tmp / "panel.csv"

    for scenario in sorted((ROOT / "scenarios").glob("*.json")):
        try:
            jsonschema.validate(json.loads(scenario.read_text()), SCHEMAS["scenario"])
            check(True, f"scenario {scenario.name} validates")
        except jsonschema.ValidationError as e:
            check(False, f"scenario {scenario.name} validates: {e.message}")

    run("simulate", "--scenario", ROOT / "scenarios/default_p3.json", "--seed", 7, "--out", panel)
    truth = validated((tmp / "panel.csv.truth.json").read_text(), "truth")
    check(truth["config"]["options"]["seed"] == "7", "seed recorded in the config snapshot")

    out = run("fit", "--panel", panel, "--kn", 8, "--pi", 0.47, "--mult", 3, "--beta-csv", tmp / "beta.csv")
    fit = validated(out.stdout, "fit_result")
    horizon = fit["result"]["horizon_years"]
    for j, (est, true) in enumerate(zip(fit["result"]["integrated_beta"], truth["result"]["integrated_beta"])):
        err = 100 * abs(est - true) / horizon
        check(err < 12.0, f"fit component {j + 1} within 12 scaled points of the truth ({err:.2f})")
    beta_lines = (tmp / "beta.csv").read_text().splitlines()
    check(beta_lines[0] == "time,X1,X2,X3", "beta path CSV header")
    check(len(beta_lines) == fit["result"]["intervals"] + 2, "beta path CSV has one row per grid point")

    out = run("select", "--panel", panel, "--kn", 4, "--level", 1e6, "--mult", 3)
    check(validated(out.stdout, "selection_result")["result"]["active_set"] == [], "huge level selects nothing")
    out = run("select", "--panel", panel, "--kn", 4, "--level", 0.1, "--mult", 3)
    sel = validated(out.stdout, "selection_result")
    check(sel["result"]["active_set"] == [0, 1, 2], "moderate level keeps the three factors")
    check(sel["result"]["kkt"]["active_ok"] and sel["result"]["kkt"]["inactive_ok"], "selection passes the KKT check")

    out = run("cv", "--panel", panel, "--mult", 3, "--kn-grid", "4,6", "--level-points", 3)
    cv = validated(out.stdout, "cv_report")
    check(len(cv["result"]["cells"]) == 6, "cv grid is the product of basis counts and levels")
    out = run("cv", "--panel", panel, "--mult", 3, "--unpenalized")
    validated(out.stdout, "cv_report")

    out = run("riskdecomp", "--panel", panel, "--kn", 4, "--mult", 3, "--window", "w1")
    validated(out.stdout, "risk_decomposition")

    # estimation table layout and thread-count invariance
    base = ["benchmark", "--table", 1, "--panel-a", "--reps", 4, "--warmup", 2, "--level-points", 4]
    one = run("--threads", 1, *base, "--csv", tmp / "t1.csv")
    two = run("--threads", 3, *base, "--csv", tmp / "t3.csv")
    rep1 = validated(one.stdout, "benchmark_report")
    rep3 = validated(two.stdout, "benchmark_report")
    check(strip_volatile(rep1) == strip_volatile(rep3), "benchmark report is identical for 1 and 3 threads")
    check((tmp / "t1.csv").read_text() == (tmp / "t3.csv").read_text(), "table CSV is identical for 1 and 3 threads")
    rows = (tmp / "t1.csv").read_text().splitlines()
    check(rows[0] == "p,estimator,component,bias,stdev,rmse,failures", "estimation table CSV header")
    names = [r.split(",")[1] for r in rows[1::3]]
    check(names == ["spline", "spline_tlp_0.05", "spline_tlp_0.01", "akx_78", "akx_91", "akx_117"],
          "estimation table estimator rows")

    out = run("benchmark", "--table", 2, "--panel-a", "--reps", 3, "--warmup", 1, "--level-points", 3,
              "--csv", tmp / "t2.csv")
    validated(out.stdout, "benchmark_report")
    check((tmp / "t2.csv").read_text().splitlines()[0] == "p,estimator,alpha_tau,relevant,irrelevant,correct",
          "selection table CSV header")

    out = run("benchmark", "--figure", 2, "--reps", 2, "--kn-grid", "4", "--levels", "0.07,1000",
              "--csv", tmp / "grid.csv")
    grid = validated(out.stdout, "tdr_fdr_grid")
    check(grid["result"]["grid"][1]["tdr"] == 0.0, "grid level far above the data selects nothing")

    # failures: machine-readable error on stderr, nonzero exit
    err = run("fit", "--panel", panel, "--mult", 3, "--bogus", 1, expect=2)
    validated(err.stderr, "error")
    err = run("fit", "--panel", panel, "--kn", 8, expect=2)
    check(validated(err.stderr, "error")["error"] == "invalid_argument", "missing --mult is reported")
    bad = tmp / "bad.csv"
    bad.write_text("time,Y,A\n0,1,2\n1,nan,2\n2,1,2\n3,1,2\n")
    err = run("fit", "--panel", bad, "--mult", 3, expect=1)
    doc = validated(err.stderr, "error")
    check(doc["error"] == "parse" and "row 3, column 2" in doc["message"], "NaN cell is located")
    err = run("fit", "--panel", panel, "--mult", 3, "--kn", 3000, expect=1)
    check(validated(err.stderr, "error")["error"] == "singular", "oversized basis is singular")
    err = run("fit", "--panel", panel, "--mult", 3, "--mode", "both", expect=2)
    validated(err.stderr, "error")

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
