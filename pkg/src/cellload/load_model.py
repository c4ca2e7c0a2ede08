"""Load-coupling model of a downlink cellular network.

Each base station ``i`` needs ``r_j / (B * log2(1 + sinr_ij))`` resource blocks
to carry rate ``r_j`` of a served user ``j``; interference from station ``k``
is scaled by its load ``rho_k``.  The cell loads are the fixed point of the
resulting load mapping.

Rates are in bits/s and bandwidth in Hz everywhere in this module, so loads
come out dimensionless.  Jacobians with respect to rates are per bit/s.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NotConverged, SingularJacobian

TOL_FP = 1e-10
MAX_ITER = 10_000
RHO_CAP = 1e3
TOL_FEAS = 1e-9

LN2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class Topology:
    """Fixed network environment.

    ``G[i, j]`` is the linear path gain from base station ``i`` to user ``j``,
    ``p[i]`` the per-resource-block transmit power in watts and ``assoc[j]``
    the index of the station serving user ``j``.
    """

    G: np.ndarray
    p: np.ndarray
    sigma2: float
    R: int
    B: float
    assoc: np.ndarray

    def __post_init__(self):
        G = np.array(self.G, dtype=float, ndmin=2)
        p = np.array(self.p, dtype=float, ndmin=1)
        assoc = np.array(self.assoc, dtype=np.int64, ndmin=1)
        M, N = G.shape
        if p.shape != (M,):
            raise ValueError(f"p must have length M={M}, got shape {p.shape}")
        if assoc.shape != (N,):
            raise ValueError(f"assoc must have length N={N}, got shape {assoc.shape}")
        if not np.all(G > 0) or not np.all(np.isfinite(G)):
            raise ValueError("path gains G must be finite and strictly positive")
        if not np.all(p > 0):
            raise ValueError("powers p must be strictly positive")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if int(self.R) != self.R or self.R < 1:
            raise ValueError("R must be a positive integer")
        if not self.B > 0:
            raise ValueError("B must be positive")
        if np.any(assoc < 0) or np.any(assoc >= M):
            raise ValueError("assoc entries must lie in [0, M)")
        for name, arr in (("G", G), ("p", p), ("assoc", assoc)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "R", int(self.R))
        object.__setattr__(self, "B", float(self.B))
        pG = p[:, None] * G
        # received power from every station except the serving one
        pG_int = pG.copy()
        pG_int[assoc, np.arange(N)] = 0.0
        for name, arr in (("_pG", pG), ("_pG_int", pG_int)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def M(self) -> int:
        return self.G.shape[0]

    @property
    def N(self) -> int:
        return self.G.shape[1]

    @property
    def RB(self) -> float:
        return self.R * self.B

    def users_of(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assoc == i)

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (
            np.array_equal(self.G, other.G)
            and np.array_equal(self.p, other.p)
            and self.sigma2 == other.sigma2
            and self.R == other.R
            and self.B == other.B
            and np.array_equal(self.assoc, other.assoc)
        )

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "N": self.N,
            "G": self.G.ravel().tolist(),
            "p": self.p.tolist(),
            "sigma2": self.sigma2,
            "R": self.R,
            "B": self.B,
            "assoc": self.assoc.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Topology":
        missing = [k for k in ("M", "N", "G", "p", "sigma2", "R", "B", "assoc") if k not in d]
        if missing:
            raise KeyError(f"topology is missing field(s): {', '.join(missing)}")
        G = np.asarray(d["G"], dtype=float).reshape(int(d["M"]), int(d["N"]))
        return cls(G=G, p=d["p"], sigma2=d["sigma2"], R=d["R"], B=d["B"], assoc=d["assoc"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FixedPointResult:
    rho: np.ndarray
    iterations: int
    residual: float
    feasible: bool


def _serving_sinr(topo: Topology, rho: np.ndarray) -> np.ndarray:
    """SINR of every user at its serving station; ``rho`` is (M,) or (S, M)."""
    served = topo._pG[topo.assoc, np.arange(topo.N)]
    return served / (rho @ topo._pG_int + topo.sigma2)


def sinr(topo: Topology, rho, i: int, j: int) -> float:
    """Averaged SINR of the link from station ``i`` to user ``j`` under loads ``rho``."""
    if not 0 <= i < topo.M:
        raise IndexError(f"base station index {i} out of range [0, {topo.M})")
    if not 0 <= j < topo.N:
        raise IndexError(f"user index {j} out of range [0, {topo.N})")
    rho = np.asarray(rho, dtype=float)
    interference = sum(topo.p[k] * topo.G[k, j] * rho[k] for k in range(topo.M) if k != i)
    return float(topo.p[i] * topo.G[i, j] / (interference + topo.sigma2))


def load_map(topo: Topology, rho, r) -> np.ndarray:
    """The load mapping q(rho, r).

    Vectorised over leading axes: ``rho`` of shape (..., M) and ``r`` of shape
    (..., N) give a result of shape (..., M).
    """
    rho = np.asarray(rho, dtype=float)
    r = np.asarray(r, dtype=float)
    blocks = r / (topo.RB * np.log2(1.0 + _serving_sinr(topo, rho)))
    if blocks.ndim == 1:
        return np.bincount(topo.assoc, weights=blocks, minlength=topo.M)
    onehot = np.zeros((topo.N, topo.M))
    onehot[np.arange(topo.N), topo.assoc] = 1.0
    return blocks @ onehot


def solve_fixed_point(
    topo: Topology,
    r,
    rho0=None,
    tol_fp: float = TOL_FP,
    max_iter: int = MAX_ITER,
    rho_cap: float = RHO_CAP,
    tol_feas: float = TOL_FEAS,
) -> FixedPointResult:
    """Find rho with rho = q(rho, r) by plain fixed-point iteration.

    Starting from zero the iterates increase monotonically towards the unique
    fixed point.  ``iterations`` counts applied updates and ``residual`` is
    the max-norm of ``rho - q(rho, r)`` at the returned point.  Raises
    NotConverged when ``max_iter`` is exhausted or any iterate exceeds
    ``rho_cap``.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (topo.N,):
        raise ValueError(f"rate vector must have length N={topo.N}")
    rho = np.zeros(topo.M) if rho0 is None else np.array(rho0, dtype=float).reshape(topo.M)
    if np.any(rho < 0):
        raise ValueError("rho0 must be nonnegative")
    nxt = load_map(topo, rho, r)
    residual = np.inf
    for it in range(max_iter + 1):
        residual = float(np.max(np.abs(nxt - rho)))
        if residual <= tol_fp:
            return FixedPointResult(
                rho=rho, iterations=it, residual=residual,
                feasible=bool(np.all(rho <= 1.0 + tol_feas)),
            )
        if it == max_iter:
            break
        rho = nxt
        if not np.all(np.isfinite(rho)) or np.any(rho > rho_cap):
            raise NotConverged(
                f"iterates exceeded divergence guard {rho_cap} after {it + 1} iterations",
                rho=rho, iterations=it + 1, residual=residual,
            )
        nxt = load_map(topo, rho, r)
    raise NotConverged(
        f"no convergence within {max_iter} iterations (residual {residual:.3e})",
        rho=rho, iterations=max_iter, residual=residual,
    )


def solve_fixed_point_batch(
    topo: Topology,
    r,
    tol_fp: float = TOL_FP,
    max_iter: int = MAX_ITER,
    stop_above: float = RHO_CAP,
):
    """Iterate many rate vectors at once from rho = 0.

    Returns ``(rho, ok)`` where ``rho`` has shape (S, M) and ``ok[s]`` is
    True when row ``s`` converged without any load exceeding ``stop_above``.
    Because the iterates from zero increase monotonically, passing
    ``stop_above=1 + tol_feas`` rejects infeasible demand early.
    """
    r = np.atleast_2d(np.asarray(r, dtype=float))
    S = r.shape[0]
    rho = np.zeros((S, topo.M))
    active = np.ones(S, dtype=bool)
    ok = np.zeros(S, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        nxt = load_map(topo, rho[idx], r[idx])
        resid = np.max(np.abs(nxt - rho[idx]), axis=1)
        rho[idx] = nxt
        blown = ~np.all(np.isfinite(nxt), axis=1) | np.any(nxt > stop_above, axis=1)
        done = (resid <= tol_fp) & ~blown
        ok[idx[done]] = True
        active[idx[done | blown]] = False
    return rho, ok


def is_feasible(topo: Topology, r, tol_feas: float = TOL_FEAS) -> bool:
    """Membership in the feasible rate region (upper load constraint only)."""
    try:
        return solve_fixed_point(topo, r, tol_feas=tol_feas).feasible
    except NotConverged:
        return False


def jacobian_g_wrt_r(topo: Topology, rho) -> np.ndarray:
    """M x N Jacobian of g(r, rho) = rho - q(rho, r) with respect to r (per bit/s)."""
    gamma = _serving_sinr(topo, np.asarray(rho, dtype=float))
    J = np.zeros((topo.M, topo.N))
    J[topo.assoc, np.arange(topo.N)] = -1.0 / (topo.RB * np.log2(1.0 + gamma))
    return J


def jacobian_g_wrt_rho(topo: Topology, rho, r) -> np.ndarray:
    """M x M Jacobian of g(r, rho) = rho - q(rho, r) with respect to rho."""
    rho = np.asarray(rho, dtype=float)
    r = np.asarray(r, dtype=float)
    gamma = _serving_sinr(topo, rho)
    cols = np.arange(topo.N)
    ln1g = np.log1p(gamma)
    # d/d rho_k of r_j / log2(1 + gamma_j), divided by p_k G_kj
    coef = (r * LN2 / (topo.RB * ln1g**2 * (gamma**-2 + gamma**-1))) / topo._pG[topo.assoc, cols]
    C = np.zeros((topo.M, topo.N))
    C[topo.assoc, cols] = coef
    J = -C @ topo._pG.T
    np.fill_diagonal(J, 1.0)
    return J


def check_diagonal_dominance(topo: Topology, rho, r) -> bool:
    """Generalized diagonal dominance certificate of the rho-Jacobian at ``rho``.

    True iff the Jacobian has nonnegative diagonal, nonpositive off-diagonal
    and ``J @ rho > 0`` on every loaded row, which makes it invertible.  Rows
    of idle cells (no users, zero load) are unit rows, so the matrix is block
    triangular and only the loaded block needs the weighted dominance.
    """
    rho = np.asarray(rho, dtype=float)
    J = jacobian_g_wrt_rho(topo, rho, r)
    off_mask = ~np.eye(topo.M, dtype=bool)
    if not (np.all(np.diag(J) >= 0) and np.all(J[off_mask] <= 0)):
        return False
    idle = np.bincount(topo.assoc, minlength=topo.M) == 0
    if np.any(J[idle][off_mask[idle]] != 0):
        return False
    return bool(np.all((J @ rho)[~idle] > 0))


def implicit_load_jacobian(topo: Topology, r, **fp_kwargs) -> np.ndarray:
    """Sensitivity d rho*/d r (M x N, per bit/s) of the fixed-point load."""
    res = solve_fixed_point(topo, r, **fp_kwargs)
    Jrho = jacobian_g_wrt_rho(topo, res.rho, r)
    Jr = jacobian_g_wrt_r(topo, res.rho)
    try:
        out = -np.linalg.solve(Jrho, Jr)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobian(str(exc)) from exc
    if not np.all(np.isfinite(out)):
        raise SingularJacobian("non-finite implicit Jacobian")
    return out
