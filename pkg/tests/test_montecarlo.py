import math

import numpy as np
import pytest

from posthoc_alpha.analytic import continuum_truncated_expected_ratio, two_threshold_expected_ratio
from posthoc_alpha.core import ValidationError
from posthoc_alpha.evidence import EvidenceModel
from posthoc_alpha.montecarlo import (
    Cell,
    SimulationConfig,
    conditional_rate_table,
    default_cells,
    expected_ratio_from_rows,
    iter_trials,
    oracle_z,
    run_simulation,
    verify_post_hoc_validity,
)
from posthoc_alpha.report import simulation_dict, to_json
from posthoc_alpha.strategies import ContinuumGreedy, Fixed, StepGreedy, TwoThreshold

TWO = TwoThreshold(0.005, 0.05)
CONT = ContinuumGreedy(0.05, 1e-4)


@pytest.fixture(scope="module")
def two_report():
    return run_simulation(SimulationConfig(TWO, n_trials=1_000_000, seed=1))


def test_two_threshold_example(two_report):
    assert abs(two_report.expected_ratio.mean - 1.9) <= 0.05
    low, high = two_report.rows
    assert low.a == 0.005 and low.cond_rate == 1.0
    assert abs(high.cond_rate - 0.04522613065326634) <= 0.001
    assert high.r_a == pytest.approx(high.cond_rate / 0.05)
    assert high.d_a == pytest.approx(high.cond_rate - 0.05)


def test_accounting(two_report):
    n = two_report.config.n_trials
    assert sum(r.n_conditional for r in two_report.rows) == n
    total_rej = sum(r.n_rejected for r in two_report.rows)
    assert total_rej == round(n * two_report.overall_rejection_rate.mean)


def test_table_identity_discrete(two_report):
    recombined = expected_ratio_from_rows(two_report.rows, two_report.config.n_trials)
    assert abs(recombined - two_report.expected_ratio.mean) <= 1e-12


def test_estimate_ci(two_report):
    est = two_report.expected_ratio
    assert est.ci95_low == pytest.approx(est.mean - 1.96 * est.std_error)
    assert est.ci95_high == pytest.approx(est.mean + 1.96 * est.std_error)
    # theoretical sd of phi/alpha: E(x^2) = 1/a1 + (a2-a1)/a2^2
    sd = math.sqrt(1 / 0.005 + 0.045 / 0.05**2 - 1.9**2)
    assert est.std_error == pytest.approx(sd / 1000, rel=0.05)


def test_fixed_control():
    rep = run_simulation(SimulationConfig(Fixed(0.05), n_trials=1_000_000, seed=3))
    assert abs(rep.expected_ratio.mean - 1.0) <= 0.01
    (row,) = rep.rows
    assert abs(row.d_a) <= 0.001
    assert row.r_a == pytest.approx(1.0, abs=0.02)
    assert verify_post_hoc_validity(rep).valid


def test_continuum_rows(make_config):
    rep = run_simulation(make_config(CONT, n=1_000_000, seed=4))
    bins = [r for r in rep.rows if r.is_bin]
    assert len(bins) == 20
    assert all(r.cond_rate == 1.0 for r in bins)
    floor_row, cap_row = rep.rows[0], rep.rows[-1]
    assert floor_row.a == 1e-4 and floor_row.cond_rate == 1.0
    assert cap_row.a == 0.05 and cap_row.cond_rate == 0.0
    assert sum(r.n_conditional for r in rep.rows) == 1_000_000
    assert rep.binned


def test_bin_midpoints_are_geometric():
    cells = default_cells(CONT)
    for c in cells:
        if not c.is_point:
            assert c.a == pytest.approx(math.sqrt(c.lo * c.hi))
    assert cells[1].lo == 1e-4 and cells[-2].hi == 0.05


def test_empty_cells_are_marked(make_config):
    rep = run_simulation(make_config(ContinuumGreedy(0.05, 1e-6), n=1000, seed=0))
    empty = [r for r in rep.rows if r.n_conditional == 0]
    assert empty and all(r.cond_rate is None and r.r_a is None for r in empty)


def test_cell_mismatch_is_an_error():
    records = list(iter_trials(SimulationConfig(TWO, n_trials=2000, seed=0)))
    with pytest.raises(ValidationError):
        conditional_rate_table(records, [Cell.point(0.05)])


def test_scalar_records_match_vector_engine():
    cfg = SimulationConfig(TWO, n_trials=3000, seed=8)
    records = list(iter_trials(cfg))
    rows = conditional_rate_table(records, default_cells(TWO))
    rep = run_simulation(cfg)
    assert rows == rep.rows
    direct = math.fsum(r.ratio_term for r in records) / len(records)
    assert direct == rep.expected_ratio.mean


def test_identity_for_step_strategy(make_config):
    rep = run_simulation(make_config(StepGreedy((0.001, 0.005, 0.05)), n=300_000, seed=5))
    assert abs(expected_ratio_from_rows(rep.rows, 300_000) - rep.expected_ratio.mean) <= 1e-12
    assert oracle_z(rep) < 4


@pytest.mark.parametrize("workers", [2, 3, 8])
def test_workers_do_not_change_bits(workers):
    base = SimulationConfig(CONT, n_trials=700_001, seed=99, workers=1)
    other = SimulationConfig(CONT, n_trials=700_001, seed=99, workers=workers)
    assert to_json(simulation_dict(run_simulation(base))) == to_json(simulation_dict(run_simulation(other)))


def test_same_seed_same_report():
    cfg = SimulationConfig(TWO, EvidenceModel.gaussian_z(), 50_000, 17)
    assert run_simulation(cfg) == run_simulation(cfg)


def test_oracle_agreement_over_seeds():
    """|MC - closed form| <= 4 SE for at least 99 of 100 seeds, per strategy."""
    for spec, exact in (
        (TWO, two_threshold_expected_ratio(0.005, 0.05)),
        (ContinuumGreedy(0.05, 1e-2), continuum_truncated_expected_ratio(0.05, 1e-2)),
    ):
        hits = 0
        for seed in range(100):
            rep = run_simulation(SimulationConfig(spec, n_trials=100_000, seed=seed))
            hits += abs(rep.expected_ratio.mean - exact) <= 4 * rep.expected_ratio.std_error
        assert hits >= 99, (spec, hits)


def test_tail_warning():
    rep = run_simulation(SimulationConfig(ContinuumGreedy(0.05, 1e-4), n_trials=50_000, seed=2))
    assert rep.max_ratio_term == 1e4
    assert rep.tail_warning
    rep = run_simulation(SimulationConfig(TWO, n_trials=50_000, seed=2))
    assert not rep.tail_warning


def test_post_hoc_verdicts():
    cal = run_simulation(SimulationConfig(CONT, EvidenceModel.calibrated_e(0.5), 1_000_000, 6))
    assert verify_post_hoc_validity(cal).valid
    assert cal.analytic_reference is None and cal.e_value_mean is not None
    raw = run_simulation(SimulationConfig(CONT, EvidenceModel.exact_uniform(), 10_000_000, 6))
    verdict = verify_post_hoc_validity(raw)
    assert not verdict.valid
    assert verdict.margin == pytest.approx(continuum_truncated_expected_ratio(0.05, 1e-4) - 1, abs=4 * raw.expected_ratio.std_error)


def test_config_validation():
    with pytest.raises(ValidationError):
        SimulationConfig(TWO, n_trials=0)
    with pytest.raises(ValidationError):
        SimulationConfig(ContinuumGreedy(0.05, 0.0))
    with pytest.raises(ValidationError):
        SimulationConfig(TWO, bin_edges=(0.01, 0.05))
    with pytest.raises(ValidationError):
        SimulationConfig(CONT, bin_edges=(0.01, 0.005))
    with pytest.raises(ValidationError):
        SimulationConfig(TWO, seed=-1)


def test_custom_bin_edges_must_cover():
    with pytest.raises(ValidationError):
        run_simulation(SimulationConfig(CONT, n_trials=10_000, bin_edges=(0.001, 0.05)))
    rep = run_simulation(SimulationConfig(CONT, n_trials=10_000, bin_edges=tuple(np.geomspace(1e-4, 0.05, 4))))
    assert len(rep.rows) == 5
