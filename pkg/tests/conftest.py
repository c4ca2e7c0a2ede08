import numpy as np
import pytest

from cellload.load_model import Topology
from cellload.topology import ScenarioConfig, generate_topology


def table2(seed=0, **kw):
    cfg = ScenarioConfig(seed=seed, **kw)
    return cfg, generate_topology(cfg)


def central_diff(f, x, steps):
    """Column-by-column central differences of vector function ``f`` at ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j, h in enumerate(steps):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.column_stack(cols)


def rel_err(A, B):
    err = float(np.max(np.abs(A - B)) / np.max(np.abs(B)))
    return err if np.isfinite(err) else float("inf")


@pytest.fixture
def scenario():
    return table2(seed=7)


@pytest.fixture
def tiny_topo():
    # two cells, three users: user 0, 1 at cell 0, user 2 at cell 1
    G = np.array([[1.0e-9, 4.0e-10, 1.0e-10],
                  [2.0e-10, 3.0e-10, 8.0e-10]])
    return Topology(G=G, p=[1.0, 2.0], sigma2=1e-11, R=10, B=1e5, assoc=[0, 0, 1])
