import csv
import json

import numpy as np
import pytest

from cellload.cli import main, prediction_csv, simulate_json
from cellload.limf import LimfModel
from cellload.load_model import Topology
from cellload.topology import ScenarioConfig, SampleSet, generate_topology


@pytest.fixture
def files(tmp_path):
    cfg = ScenarioConfig(seed=3, N=6, M=2)
    (tmp_path / "cfg.json").write_text(json.dumps(cfg.to_dict()))
    return tmp_path, cfg


def test_generate_round_trip(files):
    d, cfg = files
    assert main(["generate", str(d / "cfg.json"), str(d / "topo.json")]) == 0
    assert Topology.from_json((d / "topo.json").read_text()) == generate_topology(cfg)


def test_generate_missing_field_exits_2(files, capsys):
    d, cfg = files
    bad = cfg.to_dict()
    del bad["pathloss_exponent"]
    (d / "bad.json").write_text(json.dumps(bad))
    assert main(["generate", str(d / "bad.json"), str(d / "t.json")]) == 2
    assert "pathloss_exponent" in capsys.readouterr().err


def test_simulate_golden_and_infeasible(files, capsys):
    d, cfg = files
    main(["generate", str(d / "cfg.json"), str(d / "topo.json")])
    topo = Topology.from_json((d / "topo.json").read_text())
    rates = [3e5] * cfg.N
    (d / "rates.json").write_text(json.dumps(rates))
    assert main(["simulate", str(d / "topo.json"), str(d / "rates.json")]) == 0
    out = capsys.readouterr().out
    assert out == simulate_json(topo, rates) + "\n"
    res = json.loads(out)
    assert res["feasible"] and max(res["rho"]) <= 1
    (d / "big.json").write_text(json.dumps([1e9] * cfg.N))
    assert main(["simulate", str(d / "topo.json"), str(d / "big.json")]) == 3


def test_fit_and_predict(tmp_path, capsys):
    samples = SampleSet(0, [[1e5, 2e5], [3e5, 4e5]], [0.6, 0.4])
    (tmp_path / "s.csv").write_text(samples.to_csv())
    assert main(["fit", str(tmp_path / "s.csv"), str(tmp_path / "m.json"), "--L", "0.05"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["cost"] == pytest.approx(0.2) and printed["K"] == 2

    (tmp_path / "q.csv").write_text("r_1,r_2\n100000.0,200000.0\n250000.0,250000.0\n")
    assert main(["predict", str(tmp_path / "m.json"), str(tmp_path / "q.csv"),
                 str(tmp_path / "p.csv")]) == 0
    text = (tmp_path / "p.csv").read_text()
    model = LimfModel.from_json((tmp_path / "m.json").read_text())
    assert text == prediction_csv(model, np.array([[1e5, 2e5], [2.5e5, 2.5e5]]))
    rows = list(csv.DictReader(text.splitlines()))
    assert list(rows[0]) == ["query_id", "sigma_l", "sigma_u", "g_star", "U_mon", "U"]
    assert float(rows[0]["U_mon"]) == 0.0
    for row in rows:
        assert float(row["sigma_l"]) <= float(row["g_star"]) <= float(row["sigma_u"])


def test_fit_compatible_prints_zero_cost(tmp_path, capsys):
    (tmp_path / "s.csv").write_text(SampleSet(0, [[1e5], [2e5], [3e5]], [0.1, 0.2, 0.3]).to_csv())
    assert main(["fit", str(tmp_path / "s.csv"), str(tmp_path / "m.json")]) == 0
    assert json.loads(capsys.readouterr().out)["cost"] == 0.0


def test_fit_single_sample_without_L_exits_2(tmp_path):
    (tmp_path / "s.csv").write_text("r_1,y\n100000.0,0.1\n")
    assert main(["fit", str(tmp_path / "s.csv"), str(tmp_path / "m.json")]) == 2
    assert main(["fit", str(tmp_path / "s.csv"), str(tmp_path / "m.json"), "--L", "1"]) == 0


def test_missing_file_and_bad_usage_exit_2(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.json"), str(tmp_path / "r.json")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2


def test_experiment_rerun_is_byte_identical(tmp_path):
    plan = {"K_values": [5, 10], "n_topologies": 1, "n_experiments_per_K": 2,
            "test_set_size": 30, "master_seed": 4}
    (tmp_path / "plan.json").write_text(json.dumps(plan))
    for out in ("a", "b"):
        assert main(["experiment", str(tmp_path / "plan.json"), str(tmp_path / out)]) == 0
    a = (tmp_path / "a" / "report.csv").read_text()
    assert a == (tmp_path / "b" / "report.csv").read_text()
    cells = {(r["method"], r["K"]) for r in csv.DictReader(a.splitlines())}
    assert cells == {(m, k) for m in ("limf", "limf_no_monotone", "knn") for k in ("5", "10")}
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["plan"]["master_seed"] == 4
