"""Acceptance criteria, one test per criterion.

The default suite is run once through the CLI and every criterion is judged
from the JSON/CSV reports at its own tolerance (independently of the check's
own verdict). The suite is then run a second time into a fresh directory and
the two output trees are compared byte for byte. Runtime limits for single
checks are measured on a fresh context, so operator construction and the
eigendecomposition are included.
"""

import csv
import json
import math
import time

import pytest

from stratcap.checks import CheckContext, run_check
from stratcap.cli import main

from conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    first = tmp_path_factory.mktemp("first")
    second = tmp_path_factory.mktemp("second")
    t0 = time.perf_counter()
    rc = main(["run", "--output", str(first)])
    elapsed = time.perf_counter() - t0
    rc2 = main(["run", "--output", str(second)])
    return {"dir": first, "second": second, "rc": rc, "rc2": rc2, "elapsed": elapsed}


def report(runs, cid):
    return json.loads((runs["dir"] / f"{cid}.json").read_text(encoding="utf-8"))


def metrics(runs, cid):
    return report(runs, cid)["metrics"]


def timed(cid):
    t0 = time.perf_counter()
    res = run_check(cid, CheckContext())
    return res, time.perf_counter() - t0


def verdict(n, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_01_subordination(runs):
    m = metrics(runs, "subordination-check")
    _, secs = timed("subordination-check")
    grid = max(m["grid_l2_rel_error"].values())
    ok = m["scalar_max_rel_error"] <= 1e-8 and grid <= 1e-6 and secs < 5
    verdict(1, ok, f"scalar {m['scalar_max_rel_error']:.2e} <= 1e-8, grid {grid:.2e} <= 1e-6, {secs:.2f}s < 5s")


def test_criterion_02_moments(runs):
    err = metrics(runs, "subordinator-moments")["max_rel_error"]
    verdict(2, err <= 1e-8, f"max rel error {err:.2e} <= 1e-8")


def test_criterion_03_poisson_multiplier(runs):
    m = metrics(runs, "poisson-multiplier")
    zero = max(m["psi_zero_error"].values())
    ok = m["sigma_half_max_rel_error"] <= 1e-8 and zero <= 1e-10
    verdict(3, ok, f"psi_1/2 vs exp(-sqrt x) {m['sigma_half_max_rel_error']:.2e} <= 1e-8, psi(0) {zero:.2e} <= 1e-10")


def test_criterion_04_heat_kernel(runs):
    err = metrics(runs, "heat-kernel-gaussian")["max_relative_error"]
    _, secs = timed("heat-kernel-gaussian")
    verdict(4, err <= 1e-3 and secs < 30, f"rel error {err:.2e} <= 1e-3, {secs:.2f}s < 30s")


def test_criterion_05_semigroup_laws(runs):
    worst_alg, failed = 0.0, []
    for cid in ("heat-semigroup-laws", "frac-heat-semigroup-laws", "poisson-semigroup-laws"):
        rep = report(runs, cid)
        if not rep["passed"]:
            failed.append(cid)
        for key, m in rep["metrics"].items():
            if ":" in key:
                worst_alg = max(worst_alg, m["semigroup"], m["self_adjoint"])
                if m["positivity"] > 0 or m["contraction_excess"] > 1e-12:
                    failed.append(f"{cid}/{key}")
    ok = worst_alg <= 1e-10 and not failed
    verdict(5, ok, f"algebraic identities {worst_alg:.2e} <= 1e-10, violations {failed or 'none'}")


def test_criterion_06_two_sided_bounds(runs):
    fr = metrics(runs, "pro-frac-bounds")
    po = metrics(runs, "poisson-bounds")
    ho = metrics(runs, "kernel-holder")
    r1 = max(fr["r1_frac_heat"]["ratio"], po["r1_poisson"]["ratio"])
    h1 = [v for k, v in {**fr, **po}.items() if k.startswith("h1_")]
    h1_ok = len(h1) == 6 and all(0 < v["c_lower"] <= v["c_upper"] < math.inf for v in h1)
    holder_ok = all(math.isfinite(ho[k]["c_upper"]) for k in ("r1_frac_heat", "r1_poisson", "h1_frac_heat", "h1_poisson"))
    secs = timed("pro-frac-bounds")[1] + timed("poisson-bounds")[1]
    ok = r1 <= 10 and h1_ok and holder_ok and secs < 180
    verdict(6, ok, f"R1 ratio {r1:.3f} <= 10, H1 brackets finite/positive {h1_ok}, "
                   f"Holder finite {holder_ok}, {secs:.1f}s < 180s")


def test_criterion_07_riesz_inversion(runs):
    m = metrics(runs, "riesz-inversion")
    worst = max(v[k] for v in m.values() for k in ("left_inverse", "right_inverse", "duality"))
    ok = set(m) == {"0.2", "0.4"} and worst <= 1e-8
    verdict(7, ok, f"inversion/duality {worst:.2e} <= 1e-8 for s in {sorted(m)}")


def test_criterion_08_frac_power_integral(runs):
    m = metrics(runs, "frac-power-integral")["max_rel_error"]
    with open(runs["dir"] / "frac-power-integral.csv", newline="", encoding="utf-8") as fh:
        functions = {row[1] for row in list(csv.reader(fh))[1:]}
    worst = max(m.values())
    ok = set(m) == {"0.25", "0.5", "0.75"} and len(functions) == 20 and worst <= 1e-4
    verdict(8, ok, f"integral vs spectral {worst:.2e} <= 1e-4 on {len(functions)} functions")


def test_criterion_09_besov_oracle(runs):
    oracle = max(metrics(runs, "besov-difference-oracle")["rel_error"].values())
    basic = metrics(runs, "besov-basic")
    const = max(v["constant"] for v in basic.values())
    mm = metrics(runs, "besov-minmax")
    ok = oracle <= 1e-10 and const == 0.0 and mm["pairs"] == 100 and mm["min_relative_margin"] >= -1e-12
    verdict(9, ok, f"brute force {oracle:.2e} <= 1e-10, constants {const}, "
                   f"min-max margin {mm['min_relative_margin']:.3f} >= -1e-12 on {mm['pairs']} pairs")


def test_criterion_10_besov_equivalence(runs):
    m = metrics(runs, "besov-equivalence")
    width = max(m["width"]["128"].values())
    refine = max(max(f, 1 / f) for f in m["refinement_factor"].values())
    ok = width <= 100 and refine <= 2
    verdict(10, ok, f"c2/c1 {width:.3f} <= 100, refinement factor {refine:.3f} <= 2")


def test_criterion_11_capacity_kkt(runs):
    m = metrics(runs, "capacity-kkt")
    with open(runs["dir"] / "capacity-kkt.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    ok = m["sets"] == 50 and len(rows) == 50 and max(int(r["N"]) for r in rows) <= 32 and m["max_rel_error"] <= 1e-4
    verdict(11, ok, f"iterative vs KKT {m['max_rel_error']:.2e} <= 1e-4 on {len(rows)} sets")


def test_criterion_12_capacity_properties(runs):
    riesz = metrics(runs, "capacity-riesz-properties")
    besov = metrics(runs, "capacity-besov-properties")["properties"]
    C = metrics(runs, "capacity-sobolev-comparability")["C"]
    props = all(r[k] for r in (riesz, besov) for k in ("empty", "monotone", "subadditive"))
    verdict(12, props and C <= 20, f"empty/monotone/subadditive {props}, comparability C {C:.4f} <= 20")


def test_criterion_13_strong_capacitary(runs):
    m = metrics(runs, "strong-capacitary")
    finite = all(math.isfinite(v["ratio"]) for v in m.values())
    change = max(v["max_refinement_change"] for v in m.values())
    verdict(13, finite and change < 0.01, f"ratios finite {finite}, ladder refinement change {change:.2e} < 1%")


def test_criterion_14_embeddings(runs):
    m = metrics(runs, "thm1-carleson")
    with open(runs["dir"] / "thm1-carleson.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    chain = all(math.isfinite(float(r["strong_type"])) and float(r["weak_type"]) <= float(r["strong_type"])
                for r in rows if math.isfinite(float(r["capacity"])))
    trace = metrics(runs, "trace-embedding")
    trace_ok = all(v["constants"]["(i) weak-type"] <= v["constants"]["(i) strong-type"] for v in trace.values())
    ok = (len(rows) == 10 and m["finite_capacity_instances"] >= 1 and chain and trace_ok
          and m["homogeneity_error"] <= 1e-12 and m["zero_measure"])
    verdict(14, ok, f"{m['finite_capacity_instances']}/10 finite, A2 <= A1 {chain and trace_ok}, "
                    f"homogeneity {m['homogeneity_error']:.2e} <= 1e-12")


def test_criterion_15_full_suite(runs):
    first, second = runs["dir"], runs["second"]
    names = sorted(p.name for p in first.iterdir())
    same = names == sorted(p.name for p in second.iterdir()) and all(
        (first / n).read_bytes() == (second / n).read_bytes() for n in names)
    summary = json.loads((first / "summary.json").read_text(encoding="utf-8"))
    ok = runs["rc"] == 0 and runs["rc2"] == 0 and summary["passed"] and same and runs["elapsed"] <= 600
    verdict(15, ok, f"{len(summary['checks'])} checks, failed {summary['failed'] or 'none'}, "
                    f"{runs['elapsed']:.1f}s <= 600s, byte-identical {same} ({len(names)} files)")
