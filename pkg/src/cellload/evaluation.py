"""Metrics and the K-sweep experiment driver.

One work unit is one random topology: a shared noise-free test set is drawn,
then for every experiment a nested pool of noisy training samples is drawn
once and its first K entries are used for each K, so that sample sets grow
by inclusion across the sweep.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import KnnModel, knn_predict
from .errors import InfeasibleScenario, LengthMismatch
from .limf import eta_bounds, estimate_lipschitz, fit, sigma_bounds
from .topology import SampleSet, ScenarioConfig, generate_topology, sample_feasible

METHODS = ("limf", "limf_no_monotone", "knn")
METRICS = ("pearson", "max_error", "uncertainty")
CSV_FIELDS = ("method", "K", "N", "M", "metric", "mean", "std", "std_topology", "n", "n_excluded")


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise LengthMismatch(f"length mismatch: {pred.size} predictions vs {truth.size} truths")
    return pred, truth


def pearson(pred, truth) -> float:
    """Sample correlation; NaN (the undefined sentinel) if either input is constant."""
    pred, truth = _pair(pred, truth)
    if pred.size < 2:
        raise ValueError("pearson needs at least two points")
    a = pred - pred.mean()
    b = truth - truth.mean()
    den = np.sqrt(np.sum(a * a) * np.sum(b * b))
    if den == 0.0:
        return float("nan")
    return float(np.clip(np.sum(a * b) / den, -1.0, 1.0))


def max_error(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.max(np.abs(pred - truth)))


@dataclass(frozen=True)
class ExperimentPlan:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    K_values: tuple = tuple(range(10, 101, 10))
    n_topologies: int = 20
    n_experiments_per_K: int = 20
    test_set_size: int = 200
    noise_bound: float = 0.02
    methods: tuple = METHODS
    master_seed: int = 0
    # "estimated": from the training set only; "ideal": from the whole
    # training pool plus the test set, fixed across K
    lipschitz: str = "estimated"
    bs_index: int = 0
    k_neighbors: int = 2
    # optional sweep over network size, with M = max(1, N // 10)
    N_values: tuple | None = None

    def __post_init__(self):
        for name in ("n_topologies", "n_experiments_per_K", "test_set_size", "k_neighbors"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not self.K_values or min(self.K_values) < 1:
            raise ValueError("K_values must be a nonempty list of positive counts")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ValueError(f"unknown method(s) {sorted(bad)}; choose from {METHODS}")
        if self.lipschitz not in ("estimated", "ideal"):
            raise ValueError("lipschitz must be 'estimated' or 'ideal'")
        if "knn" in self.methods and min(self.K_values) < self.k_neighbors:
            raise ValueError("every K must be >= k_neighbors when knn is evaluated")
        if self.noise_bound < 0:
            raise ValueError("noise_bound must be nonnegative")
        object.__setattr__(self, "K_values", tuple(int(k) for k in self.K_values))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.N_values is not None:
            object.__setattr__(self, "N_values", tuple(int(n) for n in self.N_values))

    def scenarios(self) -> list[ScenarioConfig]:
        if self.N_values is None:
            return [self.scenario]
        return [dataclasses.replace(self.scenario, N=n, M=max(1, n // 10)) for n in self.N_values]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scenario"] = self.scenario.to_dict()
        d["K_values"] = list(self.K_values)
        d["methods"] = list(self.methods)
        d["N_values"] = None if self.N_values is None else list(self.N_values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        kw = dict(d)
        if "scenario" in kw:
            kw["scenario"] = ScenarioConfig.from_dict(kw["scenario"], strict=False)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(kw) - names)
        if unknown:
            raise KeyError(f"unknown plan field(s): {', '.join(unknown)}")
        return cls(**kw)


def _unit_seeds(master_seed: int, scen_idx: int, topo_idx: int):
    child = np.random.SeedSequence(master_seed, spawn_key=(scen_idx, topo_idx))
    topo_ss, sample_ss = child.spawn(2)
    return int(topo_ss.generate_state(1, dtype=np.uint32)[0]), sample_ss


def _run_unit(args):
    """All experiments on one topology; returns {(method, K, metric): array(n_exp)}."""
    plan, scen_idx, cfg_base, topo_idx = args
    topo_seed, sample_ss = _unit_seeds(plan.master_seed, scen_idx, topo_idx)
    cfg = dataclasses.replace(cfg_base, seed=topo_seed)
    topo = generate_topology(cfg)
    rng = np.random.default_rng(sample_ss)
    bs = plan.bs_index % topo.M
    n_exp = plan.n_experiments_per_K
    out = {}
    for m in plan.methods:
        for K in plan.K_values:
            out[(m, K, "pearson")] = np.full(n_exp, np.nan)
            out[(m, K, "max_error")] = np.full(n_exp, np.nan)
            if m != "knn":
                out[(m, K, "uncertainty")] = np.full(n_exp, np.nan)

    try:
        test_r, test_loads = sample_feasible(topo, cfg, plan.test_set_size, rng)
        truth = test_loads[:, bs]
        K_max = max(plan.K_values)
        use_limf = any(m != "knn" for m in plan.methods)
        for e in range(n_exp):
            pool_r, pool_loads = sample_feasible(topo, cfg, K_max, rng)
            pool_y = pool_loads[:, bs] + rng.uniform(0.0, 1.0, size=K_max) * plan.noise_bound
            if plan.lipschitz == "ideal":
                L_ideal = estimate_lipschitz((np.vstack([pool_r, test_r]),
                                             np.concatenate([pool_y, truth])))
            for K in plan.K_values:
                train = SampleSet(bs, pool_r[:K], pool_y[:K])
                if use_limf:
                    L = L_ideal if plan.lipschitz == "ideal" else estimate_lipschitz(train)
                    model = fit(train, L=L)
                    bounds = {"limf": sigma_bounds(model, test_r),
                              "limf_no_monotone": eta_bounds(model, test_r)}
                for m in plan.methods:
                    if m == "knn":
                        pred = knn_predict(KnnModel(train.rates, train.y, plan.k_neighbors), test_r)
                    else:
                        lo, hi = bounds[m]
                        pred = 0.5 * (lo + hi)
                        out[(m, K, "uncertainty")][e] = float(np.mean(0.5 * np.abs(hi - lo)))
                    out[(m, K, "pearson")][e] = pearson(pred, truth)
                    out[(m, K, "max_error")][e] = max_error(pred, truth)
    except InfeasibleScenario as exc:
        raise InfeasibleScenario(f"topology seed {topo_seed}: {exc}", seed=topo_seed) from exc
    return topo_seed, out


@dataclass
class ExperimentReport:
    plan: ExperimentPlan
    # (method, N, K, metric) -> array of shape (n_topologies, n_experiments)
    cells: dict
    topology_seeds: dict
    rows: list = field(default_factory=list)

    def __post_init__(self):
        if not self.rows:
            self.rows = self._aggregate()

    def _aggregate(self) -> list[dict]:
        rows = []
        M_of = {c.N: c.M for c in self.plan.scenarios()}
        for (method, N, K, metric) in sorted(self.cells, key=_cell_order):
            vals = self.cells[(method, N, K, metric)]
            good = ~np.isnan(vals)
            n = int(good.sum())
            flat = vals[good]
            mean = float(flat.mean()) if n else float("nan")
            std = float(flat.std(ddof=1)) if n > 1 else 0.0
            per_topo = np.array([row[~np.isnan(row)].mean() for row in vals if (~np.isnan(row)).any()])
            std_t = float(per_topo.std(ddof=1)) if per_topo.size > 1 else 0.0
            rows.append({
                "method": method, "K": K, "N": N, "M": M_of[N], "metric": metric,
                "mean": mean, "std": std, "std_topology": std_t,
                "n": n, "n_excluded": int(vals.size - n),
            })
        return rows

    def get(self, method: str, K: int, metric: str, N: int | None = None) -> dict:
        N = self.plan.scenarios()[0].N if N is None else N
        for row in self.rows:
            if (row["method"], row["K"], row["N"], row["metric"]) == (method, K, N, metric):
                return row
        raise KeyError((method, K, N, metric))

    def mean(self, method: str, K: int, metric: str, N: int | None = None) -> float:
        return self.get(method, K, metric, N)["mean"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def manifest(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "topology_seeds": {str(N): seeds for N, seeds in self.topology_seeds.items()},
        }


def _cell_order(key):
    method, N, K, metric = key
    return (METHODS.index(method), N, K, METRICS.index(metric))


def run_experiment(plan: ExperimentPlan, jobs: int = 1) -> ExperimentReport:
    """Run the full sweep; results do not depend on ``jobs``."""
    units = [(plan, s, cfg, t) for s, cfg in enumerate(plan.scenarios())
             for t in range(plan.n_topologies)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_unit, units))
    else:
        results = [_run_unit(u) for u in units]

    cells, seeds = {}, {}
    for (_, _, cfg, _), (topo_seed, out) in zip(units, results):
        seeds.setdefault(cfg.N, []).append(topo_seed)
        for (m, K, metric), vals in out.items():
            cells.setdefault((m, cfg.N, K, metric), []).append(vals)
    cells = {k: np.vstack(v) for k, v in cells.items()}
    return ExperimentReport(plan=plan, cells=cells, topology_seeds=seeds)


def write_report(report: ExperimentReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.to_csv())
    (out / "manifest.json").write_text(json.dumps(report.manifest(), indent=2, sort_keys=True) + "\n")
