"""Random network scenarios and noisy load observations.

Users and base stations are dropped uniformly in a square, linked by a
log-distance path-loss model, and each user is served by the station with the
lowest path loss.  The load model then acts as the ground truth from which
training samples are drawn.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleScenario
from .load_model import TOL_FEAS, Topology, solve_fixed_point_batch

MAX_RETRIES = 100


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario parameters.  Defaults reproduce the 3-cell, 30-user setup."""

    M: int = 3
    N: int = 30
    area_m: float = 200.0
    bs_height_m: float = 30.0
    ue_height_m: float = 1.5
    pathloss_exponent: float = 3.5
    pathloss_ref_db: float = 46.7
    # 46 dBm spread over 50 blocks
    p_dbm: float = 29.0
    # kTB over 200 kHz plus a 9 dB receiver noise figure
    sigma2_dbm: float = -112.0
    R: int = 50
    B: float = 200e3
    rate_min_bps: float = 0.1e6
    rate_max_bps: float = 1.0e6
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError("M and N must be at least 1")
        if not self.area_m > 0:
            raise ValueError("area_m must be positive")
        if not self.rate_min_bps > 0:
            raise ValueError("rate_min_bps must be positive")
        if self.rate_max_bps < self.rate_min_bps:
            raise ValueError("rate_max_bps must be >= rate_min_bps")
        if self.R < 1 or not self.B > 0:
            raise ValueError("R must be >= 1 and B positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict, strict: bool = True) -> "ScenarioConfig":
        """Build from a mapping; with ``strict`` every field must be present."""
        names = [f.name for f in dataclasses.fields(cls)]
        unknown = sorted(set(d) - set(names))
        if unknown:
            raise KeyError(f"unknown scenario field(s): {', '.join(unknown)}")
        if strict:
            missing = [n for n in names if n not in d]
            if missing:
                raise KeyError(f"scenario config is missing field(s): {', '.join(missing)}")
        kw = dict(d)
        for n in ("M", "N", "R", "seed"):
            if n in kw:
                kw[n] = int(kw[n])
        return cls(**kw)


@dataclass(frozen=True)
class Sample:
    r: np.ndarray
    y: float


@dataclass(frozen=True, eq=False)
class SampleSet:
    """K observations (rate vector, observed load) for one base station."""

    bs_index: int
    rates: np.ndarray
    y: np.ndarray
    truth: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float, ndmin=2)
        y = np.array(self.y, dtype=float, ndmin=1)
        if rates.shape[0] != y.shape[0]:
            raise ValueError("rates and y must have the same number of samples")
        if rates.shape[0] < 1:
            raise ValueError("a sample set needs at least one sample")
        if np.any(y < 0):
            raise ValueError("observed loads must be nonnegative")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "y", y)

    @property
    def K(self) -> int:
        return self.rates.shape[0]

    @property
    def N(self) -> int:
        return self.rates.shape[1]

    @property
    def samples(self) -> list[Sample]:
        return [Sample(r, float(y)) for r, y in zip(self.rates, self.y)]

    def head(self, K: int) -> "SampleSet":
        truth = None if self.truth is None else self.truth[:K]
        return SampleSet(self.bs_index, self.rates[:K], self.y[:K], truth)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"r_{j + 1}" for j in range(self.N)] + ["y"])
        for r, y in zip(self.rates, self.y):
            w.writerow([repr(float(v)) for v in r] + [repr(float(y))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, bs_index: int = 0) -> "SampleSet":
        rates, y = read_rate_csv(text, require_y=True)
        return cls(bs_index, rates, y)


def read_rate_csv(text: str, require_y: bool = False):
    """Parse a ``r_1,...,r_N[,y]`` CSV.  Returns ``(rates, y_or_None)``."""
    rows = list(csv.reader(io.StringIO(text)))
    rows = [row for row in rows if row]
    if not rows:
        raise ValueError("empty CSV")
    header = [h.strip() for h in rows[0]]
    rate_cols = [c for c, h in enumerate(header) if h.startswith("r_")]
    if not rate_cols:
        raise ValueError("CSV header has no r_* columns")
    y_col = header.index("y") if "y" in header else None
    if require_y and y_col is None:
        raise ValueError("CSV header has no y column")
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    if data.size == 0:
        raise ValueError("CSV has no data rows")
    rates = data[:, rate_cols]
    y = None if y_col is None else data[:, y_col]
    return rates, y


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def generate_topology(cfg: ScenarioConfig) -> Topology:
    rng = np.random.default_rng(cfg.seed)
    bs_xy = rng.uniform(0.0, cfg.area_m, size=(cfg.M, 2))
    ue_xy = rng.uniform(0.0, cfg.area_m, size=(cfg.N, 2))
    horiz = np.linalg.norm(bs_xy[:, None, :] - ue_xy[None, :, :], axis=2)
    d = np.hypot(horiz, cfg.bs_height_m - cfg.ue_height_m)
    # log-distance model is only meaningful beyond the 1 m reference
    d = np.maximum(d, 1.0)
    pl_db = cfg.pathloss_ref_db + 10.0 * cfg.pathloss_exponent * np.log10(d)
    G = 10.0 ** (-pl_db / 10.0)
    assoc = np.argmin(pl_db, axis=0)
    return Topology(
        G=G,
        p=np.full(cfg.M, dbm_to_watt(cfg.p_dbm)),
        sigma2=dbm_to_watt(cfg.sigma2_dbm),
        R=cfg.R,
        B=cfg.B,
        assoc=assoc,
    )


def sample_rates(cfg: ScenarioConfig, rng: np.random.Generator, size=None) -> np.ndarray:
    """I.i.d. uniform user rates; shape (N,) or (size, N)."""
    shape = (cfg.N,) if size is None else (size, cfg.N)
    if cfg.rate_max_bps == cfg.rate_min_bps:
        return np.full(shape, float(cfg.rate_min_bps))
    return rng.uniform(cfg.rate_min_bps, cfg.rate_max_bps, size=shape)


def sample_feasible(topo: Topology, cfg: ScenarioConfig, n: int, rng: np.random.Generator,
                    max_retries: int = MAX_RETRIES):
    """Draw ``n`` feasible rate vectors and their noise-free fixed-point loads.

    Infeasible draws are replaced; a slot that fails ``max_retries`` times
    raises InfeasibleScenario.
    """
    rates = sample_rates(cfg, rng, size=n)
    loads = np.empty((n, topo.M))
    pending = np.arange(n)
    for _ in range(max_retries):
        rho, ok = solve_fixed_point_batch(topo, rates[pending], stop_above=1.0 + TOL_FEAS)
        loads[pending[ok]] = rho[ok]
        pending = pending[~ok]
        if pending.size == 0:
            return rates, loads
        rates[pending] = sample_rates(cfg, rng, size=pending.size)
    raise InfeasibleScenario(
        f"{pending.size} rate draw(s) stayed infeasible after {max_retries} attempts",
        seed=cfg.seed,
    )


def acquire_samples(topo: Topology, cfg: ScenarioConfig, K: int, noise_bound: float,
                    rng: np.random.Generator) -> list[SampleSet]:
    """K noisy observations per base station, y = rho_i + eps with eps ~ U[0, noise_bound]."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if noise_bound < 0:
        raise ValueError("noise_bound must be nonnegative")
    rates, loads = sample_feasible(topo, cfg, K, rng)
    eps = rng.uniform(0.0, 1.0, size=loads.shape) * noise_bound
    y = loads + eps
    return [SampleSet(i, rates, y[:, i], truth=loads[:, i]) for i in range(topo.M)]


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return ScenarioConfig.from_dict(json.load(fh))
