"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line that pytest prints in the
"acceptance criteria" summary section.
"""

import json
import math
import time

import numpy as np
import pytest

from posthoc_alpha.analytic import continuum_truncated_expected_ratio
from posthoc_alpha.cli import main
from posthoc_alpha.core import reject
from posthoc_alpha.evidence import EvidenceModel, draw_batch
from posthoc_alpha.montecarlo import SimulationConfig, expected_ratio_from_rows, run_simulation
from posthoc_alpha.rng import CounterRNG
from posthoc_alpha.strategies import ContinuumGreedy, Fixed, StepGreedy, TwoThreshold

from .conftest import binomial_se, record

A1, A2 = 0.005, 0.05
RATE_A2 = (0.05 - 0.005) / (1 - 0.005)


def _json(capsys, *argv):
    code = main(list(argv))
    out, _ = capsys.readouterr()
    assert code == 0
    return out


@pytest.fixture(scope="module")
def continuum_runs():
    t0 = time.perf_counter()
    runs = {
        eps: run_simulation(SimulationConfig(ContinuumGreedy(0.05, eps), n_trials=10_000_000, seed=2024, workers=4))
        for eps in (1e-2, 1e-3, 1e-4)
    }
    return runs, time.perf_counter() - t0


def test_c1_exact_oracle(capsys):
    main(["exact", "two:0.005,0.05", "--format", "json"])  # warm-up
    capsys.readouterr()
    t0 = time.perf_counter()
    out = _json(capsys, "exact", "two:0.005,0.05", "--format", "json")
    elapsed = time.perf_counter() - t0
    doc = json.loads(out)
    rates = {r["a"]: r["cond_rate"] for r in doc["conditional_rates"]}
    ok = (
        math.isclose(doc["expected_ratio"], 1.9, rel_tol=1e-12)
        and rates[A1] == 1.0
        and math.isclose(rates[A2], RATE_A2, rel_tol=1e-12)
        and elapsed < 0.1
    )
    record("C1 exact two:0.005,0.05", ok, f"E r = {doc['expected_ratio']!r}, rate|a2 = {rates[A2]!r}, {elapsed * 1e3:.1f} ms")
    assert ok


def test_c2_two_threshold_monte_carlo():
    t0 = time.perf_counter()
    rep = run_simulation(SimulationConfig(TwoThreshold(A1, A2), n_trials=1_000_000, seed=1))
    elapsed = time.perf_counter() - t0
    low, high = rep.rows
    ok = (
        abs(rep.expected_ratio.mean - 1.9) <= 0.05
        and low.cond_rate == 1.0
        and abs(high.cond_rate - 0.0452261) <= 0.001
        and elapsed < 5
    )
    record(
        "C2 two-threshold MC",
        ok,
        f"E r = {rep.expected_ratio.mean:.5f} (SE {rep.expected_ratio.std_error:.4f}), "
        f"rate|a1 = {low.cond_rate}, rate|a2 = {high.cond_rate:.6f}, {elapsed:.2f} s",
    )
    assert ok


def test_c3_continuum_divergence(continuum_runs):
    runs, elapsed = continuum_runs
    parts, ok = [], elapsed < 60
    closed = []
    for eps, rep in runs.items():
        cf = continuum_truncated_expected_ratio(0.05, eps)
        assert cf == 1 + math.log(0.05 / eps)
        closed.append(cf)
        z = abs(rep.expected_ratio.mean - cf) / rep.expected_ratio.std_error
        ok &= z <= 4
        parts.append(f"eps={eps:g}: {rep.expected_ratio.mean:.4f} vs {cf:.4f} ({z:.2f} SE)")
    ok &= all(abs((b - a) - math.log(10)) <= 1e-12 for a, b in zip(closed, closed[1:]))
    record("C3 continuum log-divergence", ok, "; ".join(parts) + f"; {elapsed:.1f} s")
    assert ok


def test_c4_pointwise_conditional_failure(continuum_runs):
    runs, _ = continuum_runs
    ok, checked = True, 0
    for eps, rep in runs.items():
        for row in rep.rows:
            if row.is_bin and row.lo >= eps and row.hi <= 0.05:
                checked += 1
                ok &= row.cond_rate == 1.0
    record("C4 interior bins always reject", ok, f"{checked} bins checked")
    assert ok and checked == 60


def test_c5_e_value_validity():
    batch = draw_batch(EvidenceModel.calibrated_e(0.5), CounterRNG(0), 0, 1_000_000)
    mean_e = float(batch.e.mean())
    frac = float(np.mean(batch.p <= 0.05))
    ok = abs(mean_e - 1.0) <= 0.002 and frac <= 0.051
    record("C5 e-value validity", ok, f"mean e = {mean_e:.5f}, P(p* <= 0.05) = {frac:.6f}")
    assert ok


def test_c6_post_hoc_repair(capsys):
    out = _json(capsys, "compare", "--strategy", "cont:0.05,1e-4", "--delta", "0.5", "--n", "1000000", "--format", "json")
    doc = json.loads(out)
    raw, cal = doc["raw"]["expected_ratio"], doc["calibrated"]["expected_ratio"]
    ok = (
        doc["verdicts"]["raw"]["verdict"] == "violated"
        and abs(raw["mean"] - 7.215) <= 0.5
        and doc["verdicts"]["calibrated"]["verdict"] == "valid"
        and cal["mean"] <= 1 + 3 * cal["std_error"]
    )
    record("C6 post-hoc repair", ok, f"raw {raw['mean']:.4f} violated, p* {cal['mean']:.4g} valid")
    assert ok


def test_c7_calibrated_control():
    rep = run_simulation(SimulationConfig(Fixed(0.05), n_trials=1_000_000, seed=7))
    (row,) = rep.rows
    ok = abs(rep.expected_ratio.mean - 1.0) <= 0.01 and abs(row.d_a) <= 0.001
    record("C7 fixed-level control", ok, f"E r = {rep.expected_ratio.mean:.5f}, d_a = {row.d_a:+.6f}")
    assert ok


def test_c8_determinism_across_workers(capsys):
    base = ["simulate", "--strategy", "cont:0.05,1e-4", "--n", "1000000", "--seed", "5", "--format", "json"]
    one = _json(capsys, *base, "--workers", "1")
    eight = _json(capsys, *base, "--workers", "8")
    ok = one == eight
    record("C8 workers=1 vs workers=8", ok, f"byte-identical JSON ({len(one)} bytes)" if ok else "JSON differs")
    assert ok


def test_c9_property_suite():
    grid = np.linspace(1e-4, 1.0, 10_000)
    checks = {}

    levels = np.linspace(0.001, 1.0, 60)
    ps = np.linspace(0.0005, 1.0, 60)
    checks["reject monotone"] = all(
        (not reject(p, a)) or reject(p, b) for p in ps for a, b in zip(levels, levels[1:])
    ) and all((not reject(q, a)) or reject(p, a) for a in levels for p, q in zip(ps, ps[1:]))

    checks["step == two-threshold"] = bool(
        np.array_equal(StepGreedy((A1, A2)).select(grid), TwoThreshold(A1, A2).select(grid))
    )

    n = 1_000_000
    p = draw_batch(EvidenceModel.exact_uniform(), CounterRNG(9), 0, n).p
    checks["uniformity"] = all(
        abs(np.mean(p <= a) - a) <= 4 * binomial_se(a, n) for a in (0.005, 0.01, 0.05, 0.1, 0.5)
    )

    rep = run_simulation(SimulationConfig(TwoThreshold(A1, A2), n_trials=n, seed=11))
    checks["table identity"] = abs(expected_ratio_from_rows(rep.rows, n) - rep.expected_ratio.mean) <= 1e-12

    ok = all(checks.values())
    record("C9 property suite", ok, ", ".join(f"{k}: {'ok' if v else 'FAIL'}" for k, v in checks.items()))
    assert ok
