"""k-nearest-neighbour interpolation baseline (inverse-distance weighted)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import RATE_SCALE

EXACT_MATCH = 1e-12


@dataclass(frozen=True, eq=False)
class KnnModel:
    rates: np.ndarray
    y: np.ndarray
    k_neighbors: int = 2

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float, ndmin=2)
        y = np.array(self.y, dtype=float, ndmin=1)
        if rates.shape[0] != y.shape[0]:
            raise ValueError("rates and y must have the same number of samples")
        if not 1 <= self.k_neighbors <= y.shape[0]:
            raise ValueError(f"need 1 <= k_neighbors <= K, got k={self.k_neighbors}, K={y.shape[0]}")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "y", y)


def knn_predict(model: KnnModel, r):
    """IDW mean of the k nearest training loads; exact hits return their load.

    Ties at equal distance go to the lower sample index.  ``r`` may be (N,)
    or (Q, N).
    """
    x = np.asarray(r, dtype=float) * RATE_SCALE
    single = x.ndim == 1
    x = np.atleast_2d(x)
    d = np.linalg.norm(model.rates[None, :, :] * RATE_SCALE - x[:, None, :], axis=2)
    order = np.argsort(d, axis=1, kind="stable")[:, : model.k_neighbors]
    dk = np.take_along_axis(d, order, axis=1)
    yk = model.y[order]
    exact = dk[:, 0] < EXACT_MATCH
    w = 1.0 / np.where(exact[:, None], 1.0, dk)
    out = np.sum(w * yk, axis=1) / np.sum(w, axis=1)
    out[exact] = yk[exact, 0]
    return float(out[0]) if single else out
