import csv
import io
import math

import numpy as np
import pytest

from cellload.errors import InfeasibleScenario, LengthMismatch
from cellload.evaluation import (
    CSV_FIELDS,
    ExperimentPlan,
    ExperimentReport,
    max_error,
    pearson,
    run_experiment,
)
from cellload.topology import ScenarioConfig


def small_plan(**kw):
    base = dict(K_values=(5, 10), n_topologies=2, n_experiments_per_K=2,
                test_set_size=40, master_seed=11)
    base.update(kw)
    return ExperimentPlan(**base)


def test_pearson_examples():
    x = np.arange(5.0)
    assert pearson(x, 3 * x + 1) == pytest.approx(1.0)
    assert pearson(x, -x) == pytest.approx(-1.0)
    # hand value: cov = 7, var_a = 10, var_b = 6.8
    assert pearson([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]) == pytest.approx(0.8)
    assert math.isnan(pearson([1, 1, 1], [1, 2, 3]))
    with pytest.raises(LengthMismatch):
        pearson([1, 2], [1, 2, 3])


def test_max_error_examples():
    assert max_error([0.1, 0.2], [0.1, 0.2]) == 0.0
    assert max_error([0.1, 0.5, 0.2], [0.1, 0.2, 0.2]) == pytest.approx(0.3)
    rng = np.random.default_rng(0)
    a, b = rng.random(50), rng.random(50)
    assert max_error(a, b) >= np.mean(np.abs(a - b))


@pytest.mark.xfail(strict=True, reason="30-dim convergence is slow: measured 0.87 at K=200, 0.92 at K=1600")
def test_noise_free_large_K_correlates_with_truth_table2():
    plan = ExperimentPlan(K_values=(1600,), n_topologies=1, n_experiments_per_K=1,
                          test_set_size=200, noise_bound=0.0, methods=("limf",))
    assert run_experiment(plan).mean("limf", 1600, "pearson") >= 0.99


def test_noise_free_large_K_correlates_with_truth_low_dim():
    plan = ExperimentPlan(scenario=ScenarioConfig(N=5, M=1), K_values=(200,), n_topologies=1,
                          n_experiments_per_K=1, test_set_size=200, noise_bound=0.0,
                          methods=("limf",))
    assert run_experiment(plan).mean("limf", 200, "pearson") >= 0.99


def test_report_is_deterministic_and_complete():
    plan = small_plan()
    a, b = run_experiment(plan), run_experiment(plan)
    assert a.to_csv() == b.to_csv()
    rows = list(csv.DictReader(io.StringIO(a.to_csv())))
    assert tuple(rows[0]) == CSV_FIELDS
    cells = {(r["method"], int(r["K"]), r["metric"]) for r in rows}
    for m in plan.methods:
        for K in plan.K_values:
            assert (m, K, "pearson") in cells and (m, K, "max_error") in cells
            assert ((m, K, "uncertainty") in cells) == (m != "knn")
    assert all(int(r["n"]) == 4 and r["M"] == "3" for r in rows)


def test_parallel_matches_serial():
    plan = small_plan(n_topologies=2, n_experiments_per_K=1)
    assert run_experiment(plan, jobs=2).to_csv() == run_experiment(plan).to_csv()


def test_uncertainty_pointwise_ordering_in_cells():
    report = run_experiment(small_plan())
    for K in (5, 10):
        mon = report.cells[("limf", 30, K, "uncertainty")]
        plain = report.cells[("limf_no_monotone", 30, K, "uncertainty")]
        assert np.all(mon <= plain + 1e-12)


def test_aggregation_excludes_undefined_and_is_order_invariant():
    plan = small_plan(methods=("limf",), K_values=(5,))
    vals = np.array([[0.5, np.nan], [0.7, 0.9]])
    cells = {("limf", 30, 5, "pearson"): vals}
    row = ExperimentReport(plan, cells, {30: [0, 1]}).rows[0]
    assert row["n"] == 3 and row["n_excluded"] == 1
    assert row["mean"] == pytest.approx(0.7)
    assert row["std"] == pytest.approx(np.std([0.5, 0.7, 0.9], ddof=1))
    assert row["std_topology"] == pytest.approx(np.std([0.5, 0.8], ddof=1))
    swapped = {("limf", 30, 5, "pearson"): vals[::-1, ::-1]}
    row2 = ExperimentReport(plan, swapped, {30: [1, 0]}).rows[0]
    assert row2["mean"] == pytest.approx(row["mean"]) and row2["std"] == pytest.approx(row["std"])


def test_network_size_sweep_scales_cells():
    plan = small_plan(N_values=(10, 20), K_values=(5,), n_topologies=1, n_experiments_per_K=1,
                      methods=("limf",))
    report = run_experiment(plan)
    assert report.get("limf", 5, "pearson", N=10)["M"] == 1
    assert report.get("limf", 5, "pearson", N=20)["M"] == 2


def test_infeasible_scenario_names_seed():
    scen = ScenarioConfig(rate_min_bps=5e7, rate_max_bps=6e7)
    with pytest.raises(InfeasibleScenario, match="topology seed"):
        run_experiment(small_plan(scenario=scen, n_topologies=1))


def test_plan_validation_and_round_trip():
    plan = small_plan(lipschitz="ideal")
    assert ExperimentPlan.from_dict(plan.to_dict()) == plan
    with pytest.raises(ValueError):
        small_plan(methods=("gpr",))
    with pytest.raises(ValueError):
        small_plan(K_values=(1, 5))
    with pytest.raises(KeyError):
        ExperimentPlan.from_dict({"topologies": 3})
