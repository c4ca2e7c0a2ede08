"""Minimax-optimal learning of Lipschitz-monotone (LIMF) cell-load functions.

For compatible data ``(r^k, rho^k)`` and Lipschitz constant ``L`` every
L-Lipschitz function that is nondecreasing in each rate and interpolates the
data lies between

    lower(r) = max_k rho^k - L ||(r^k - r)_+||
    upper(r) = min_k rho^k + L ||(r - r^k)_+||

and the midpoint of the two minimises the worst-case error.  Dropping the
positive parts gives the looser Lipschitz-only bounds.

Rates are passed in bits/s; all norms are taken on Mbit/s-scaled rates, so
``L`` is in load units per Mbit/s.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import EmptyModel, IncompatibleData
from .lp import RATE_SCALE, SmoothingProblem, check_compatibility, smooth
from .topology import SampleSet

COMPAT_SLACK = 1e-9
MIN_PAIR_DIST = 1e-12


class BoundPair(NamedTuple):
    lower: float | np.ndarray
    upper: float | np.ndarray


@dataclass(frozen=True, eq=False)
class LimfModel:
    """Compatible sample set plus Lipschitz constant for one base station."""

    rates: np.ndarray
    loads: np.ndarray
    L: float
    bs_index: int = 0
    smoothing_cost: float = 0.0

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float, ndmin=2)
        loads = np.array(self.loads, dtype=float, ndmin=1)
        if loads.size == 0:
            raise EmptyModel("a LIMF model needs at least one sample")
        if rates.shape[0] != loads.shape[0]:
            raise ValueError("rates and loads must have the same number of samples")
        if not self.L >= 0:
            raise ValueError("L must be nonnegative")
        if np.any(loads < -1e-12):
            raise ValueError("loads must be nonnegative")
        ok, worst = check_compatibility(loads, rates, self.L, tol=COMPAT_SLACK)
        if not ok:
            raise IncompatibleData(
                f"sample set violates the L-monotone compatibility constraints by {worst:.3e}"
            )
        rates.setflags(write=False)
        loads.setflags(write=False)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "loads", loads)
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "_x", rates * RATE_SCALE)

    @property
    def K(self) -> int:
        return self.loads.shape[0]

    @property
    def N(self) -> int:
        return self.rates.shape[1]

    def to_dict(self) -> dict:
        data = [list(map(float, r)) + [float(v)] for r, v in zip(self.rates, self.loads)]
        return {"bs_index": self.bs_index, "L": self.L, "data": data}

    @classmethod
    def from_dict(cls, d: dict) -> "LimfModel":
        data = np.asarray(d["data"], dtype=float)
        if data.ndim != 2 or data.shape[0] == 0:
            raise EmptyModel("model file holds no samples")
        return cls(rates=data[:, :-1], loads=data[:, -1], L=d["L"], bs_index=int(d.get("bs_index", 0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "LimfModel":
        return cls.from_dict(json.loads(text))


def _queries(model: LimfModel, r):
    x = np.asarray(r, dtype=float) * RATE_SCALE
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.N:
        raise ValueError(f"query dimension {x.shape[1]} does not match model N={model.N}")
    return x, single


def _bounds(model: LimfModel, r, monotone: bool) -> BoundPair:
    x, single = _queries(model, r)
    diff = model._x[None, :, :] - x[:, None, :]  # r^k - r, shape (Q, K, N)
    if monotone:
        down = np.sqrt(np.sum(np.maximum(diff, 0.0) ** 2, axis=2))
        up = np.sqrt(np.sum(np.maximum(-diff, 0.0) ** 2, axis=2))
    else:
        down = up = np.sqrt(np.sum(diff**2, axis=2))
    lower = np.max(model.loads - model.L * down, axis=1)
    upper = np.min(model.loads + model.L * up, axis=1)
    if single:
        return BoundPair(float(lower[0]), float(upper[0]))
    return BoundPair(lower, upper)


def sigma_bounds(model: LimfModel, r) -> BoundPair:
    """Tight lower/upper bounds using monotonicity and the Lipschitz constant.

    ``r`` may be a single rate vector (N,) or a batch (Q, N).
    """
    return _bounds(model, r, monotone=True)


def eta_bounds(model: LimfModel, r) -> BoundPair:
    """Bounds from the Lipschitz constant alone (no monotonicity)."""
    return _bounds(model, r, monotone=False)


def predict(model: LimfModel, r):
    lo, hi = sigma_bounds(model, r)
    return 0.5 * (lo + hi)


def predict_no_monotone(model: LimfModel, r):
    lo, hi = eta_bounds(model, r)
    return 0.5 * (lo + hi)


def uncertainty(model: LimfModel, r):
    lo, hi = sigma_bounds(model, r)
    return 0.5 * (hi - lo)


def uncertainty_comparison(model: LimfModel, queries) -> np.ndarray:
    """Per-query ``(U_mon, U)``: half-widths with and without monotonicity."""
    s_lo, s_hi = sigma_bounds(model, np.atleast_2d(queries))
    e_lo, e_hi = eta_bounds(model, np.atleast_2d(queries))
    return np.column_stack([0.5 * np.abs(s_hi - s_lo), 0.5 * np.abs(e_hi - e_lo)])


def estimate_lipschitz(raw: SampleSet | tuple) -> float:
    """Largest observed slope max_{k != j} |y^k - y^j| / ||r^k - r^j||.

    Pairs closer than 1e-12 (Mbit/s) are skipped; returns 0 when no pair is
    admissible.  Accepts a SampleSet or a ``(rates, y)`` tuple.
    """
    rates, y = (raw.rates, raw.y) if isinstance(raw, SampleSet) else raw
    x = np.atleast_2d(np.asarray(rates, dtype=float)) * RATE_SCALE
    y = np.asarray(y, dtype=float)
    if y.shape[0] < 2:
        return 0.0
    k, j = np.triu_indices(y.shape[0], k=1)
    dist = np.linalg.norm(x[k] - x[j], axis=1)
    keep = dist >= MIN_PAIR_DIST
    if not keep.any():
        return 0.0
    return float(np.max(np.abs(y[k] - y[j])[keep] / dist[keep]))


def fit(raw: SampleSet, L: float | None = None) -> LimfModel:
    """Training step: estimate L (unless given), then smooth the samples.

    Raises ValueError when L must be estimated from fewer than two samples.
    """
    if raw.K == 0:
        raise EmptyModel("cannot fit an empty sample set")
    if L is None:
        if raw.K < 2:
            raise ValueError("estimating L needs at least two samples; pass L explicitly")
        L = estimate_lipschitz(raw)
    sol = smooth(SmoothingProblem(y=raw.y, r=raw.rates, L=L))
    # smoothed values stay within [min y, max y]; clip float dust below zero
    loads = np.maximum(sol.rho_tilde, 0.0)
    return LimfModel(rates=raw.rates, loads=loads, L=L, bs_index=raw.bs_index,
                     smoothing_cost=sol.cost)
