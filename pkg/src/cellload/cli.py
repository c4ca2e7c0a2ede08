"""Command-line interface: ``cellload {generate,simulate,fit,predict,experiment}``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .errors import CellLoadError, InfeasibleScenario, LpInfeasible, NotConverged, SingularJacobian
from .evaluation import ExperimentPlan, run_experiment, write_report
from .limf import LimfModel, fit, sigma_bounds, uncertainty_comparison
from .load_model import Topology, solve_fixed_point
from .topology import SampleSet, generate_topology, load_config, read_rate_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (NotConverged, SingularJacobian, LpInfeasible, InfeasibleScenario)


def simulate_json(topo: Topology, rates) -> str:
    res = solve_fixed_point(topo, rates)
    return json.dumps({
        "rho": res.rho.tolist(),
        "residual": res.residual,
        "feasible": res.feasible,
        "iterations": res.iterations,
    })


def prediction_csv(model: LimfModel, queries) -> str:
    queries = np.atleast_2d(queries)
    lo, hi = sigma_bounds(model, queries)
    unc = uncertainty_comparison(model, queries)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["query_id", "sigma_l", "sigma_u", "g_star", "U_mon", "U"])
    for q in range(queries.shape[0]):
        g = 0.5 * (lo[q] + hi[q])
        w.writerow([q] + [repr(float(v)) for v in (lo[q], hi[q], g, unc[q, 0], unc[q, 1])])
    return buf.getvalue()


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    Path(args.out).write_text(generate_topology(cfg).to_json() + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    topo = Topology.from_json(Path(args.topology).read_text())
    rates = np.asarray(json.loads(Path(args.rates).read_text()), dtype=float)
    print(simulate_json(topo, rates))
    return EXIT_OK


def cmd_fit(args) -> int:
    raw = SampleSet.from_csv(Path(args.samples).read_text(), bs_index=args.bs_index)
    model = fit(raw, L=args.L)
    Path(args.model_out).write_text(model.to_json() + "\n")
    print(json.dumps({"L": model.L, "cost": model.smoothing_cost, "K": model.K}))
    return EXIT_OK


def cmd_predict(args) -> int:
    model = LimfModel.from_json(Path(args.model).read_text())
    queries, _ = read_rate_csv(Path(args.queries).read_text())
    Path(args.out).write_text(prediction_csv(model, queries))
    return EXIT_OK


def cmd_experiment(args) -> int:
    plan = ExperimentPlan.from_dict(json.loads(Path(args.plan).read_text()))
    report = run_experiment(plan, jobs=args.jobs)
    write_report(report, args.out_dir)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellload", description="Simulate coupled cell loads and learn them from few samples.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a random topology from a scenario config")
    p.add_argument("config", help="scenario config JSON")
    p.add_argument("out", help="topology JSON to write")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="solve the load fixed point for a rate vector")
    p.add_argument("topology", help="topology JSON")
    p.add_argument("rates", help="JSON array of user rates in bits/s")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="estimate L, smooth samples and write a LIMF model")
    p.add_argument("samples", help="sample CSV with header r_1,...,r_N,y")
    p.add_argument("model_out", help="model JSON to write")
    p.add_argument("--L", type=float, default=None, help="Lipschitz constant (load per Mbit/s)")
    p.add_argument("--bs-index", type=int, default=0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="bounds, prediction and uncertainty for query rates")
    p.add_argument("model", help="model JSON")
    p.add_argument("queries", help="CSV with header r_1,...,r_N")
    p.add_argument("out", help="prediction CSV to write")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("experiment", help="run a seeded K-sweep and write report.csv")
    p.add_argument("plan", help="experiment plan JSON")
    p.add_argument("out_dir")
    p.add_argument("--jobs", type=int, default=1, help="concurrent topology workers")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (KeyError, ValueError, TypeError, OSError, CellLoadError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
