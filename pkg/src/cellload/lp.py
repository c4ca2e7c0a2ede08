"""l1 monotone smoothing of noisy samples as a small dense linear program.

Given observations ``y`` at rate vectors ``r`` and a Lipschitz constant ``L``
we look for the closest (in l1) values ``rho`` that satisfy

    rho_k - rho_j <= L * ||(r_k - r_j)_+||   for all k, j,

i.e. values that some L-Lipschitz monotone function can interpolate.  With
``q = rho - y = q_plus - q_minus`` this is an LP in ``2K`` nonnegative
variables, solved here by a two-phase tableau simplex with Bland's rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LpInfeasible, LpUnbounded

PIVOT_TOL = 1e-9
COMPAT_TOL = 1e-8
RATE_SCALE = 1e-6  # bits/s -> Mbit/s


# --------------------------------------------------------------------------
# generic dense simplex


def _pivot(T, z, basis, row, col):
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    z -= z[col] * T[row]
    basis[row] = col


def _run(T, z, basis, allowed, tol, max_iter):
    """Bland-rule simplex iterations on tableau ``T`` with reduced-cost row ``z``."""
    for _ in range(max_iter):
        cand = np.flatnonzero((z[:-1] < -tol) & allowed)
        if cand.size == 0:
            return
        col = cand[0]
        a = T[:, col]
        pos = a > tol
        if not np.any(pos):
            raise LpUnbounded("objective unbounded below")
        ratios = np.full(a.shape, np.inf)
        ratios[pos] = T[pos, -1] / a[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        row = ties[np.argmin(basis[ties])]
        _pivot(T, z, basis, row, col)
    raise RuntimeError(f"simplex did not terminate within {max_iter} pivots")


def solve(c, A_ub, b_ub, tol: float = PIVOT_TOL, max_iter: int = 100_000):
    """Minimise ``c @ x`` subject to ``A_ub @ x <= b_ub`` and ``x >= 0``.

    Returns ``(x, objective)``.  Internal plumbing for :func:`smooth`; the
    right-hand side may be negative (phase one handles it).
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A_ub, dtype=float))
    b = np.asarray(b_ub, dtype=float)
    m, n = A.shape
    neg = b < 0
    n_art = int(neg.sum())
    width = n + m + n_art
    T = np.zeros((m, width + 1))
    T[:, :n] = A
    T[:, n:n + m] = np.eye(m)
    T[:, -1] = b
    T[neg] *= -1.0
    basis = np.arange(n, n + m)
    art_rows = np.flatnonzero(neg)
    art_cols = n + m + np.arange(n_art)
    T[art_rows, art_cols] = 1.0
    basis[art_rows] = art_cols

    if n_art:
        cost = np.zeros(width + 1)
        cost[art_cols] = 1.0
        z = cost - T[art_rows].sum(axis=0)
        z[art_cols] = 0.0
        _run(T, z, basis, np.ones(width, dtype=bool), tol, max_iter)
        if -z[-1] > tol * max(1.0, np.abs(b).max()):
            raise LpInfeasible(f"phase one ended with infeasibility {-z[-1]:.3e}")
        # drive remaining (zero-level) artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for row in np.flatnonzero(basis >= n + m):
            nz = np.flatnonzero(np.abs(T[row, :n + m]) > tol)
            if nz.size:
                _pivot(T, z, basis, row, nz[0])
            else:
                keep[row] = False
        T = np.delete(T[keep], art_cols, axis=1)
        basis = basis[keep]

    cost = np.zeros(n + m + 1)
    cost[:n] = c
    z = cost - cost[basis] @ T
    _run(T, z, basis, np.ones(n + m, dtype=bool), tol, max_iter)
    x = np.zeros(n + m)
    x[basis] = T[:, -1]
    x = np.maximum(x[:n], 0.0)
    return x, float(c @ x)


# --------------------------------------------------------------------------
# monotone smoothing


@dataclass(frozen=True)
class SmoothingProblem:
    y: np.ndarray
    r: np.ndarray
    L: float

    def __post_init__(self):
        y = np.array(self.y, dtype=float, ndmin=1)
        r = np.array(self.r, dtype=float, ndmin=2)
        if y.shape[0] < 1 or r.shape[0] != y.shape[0]:
            raise ValueError("need K >= 1 observations with one rate vector each")
        if not self.L >= 0:
            raise ValueError("L must be nonnegative")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "L", float(self.L))

    @property
    def K(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True)
class SmoothingSolution:
    rho_tilde: np.ndarray
    cost: float
    q: np.ndarray


def positive_part_distances(r) -> np.ndarray:
    """``P[k, j] = ||(r_k - r_j)_+||`` on Mbit/s-scaled rates."""
    x = np.asarray(r, dtype=float) * RATE_SCALE
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.sum(np.maximum(diff, 0.0) ** 2, axis=2))


def _slack(y, P, L):
    # S[k, j]: the right-hand side of q_k - q_j <= S[k, j]
    return y[None, :] - y[:, None] + L * P


def _restricted_lp(K, pairs, S):
    A = np.zeros((len(pairs), 2 * K))
    rows = np.arange(len(pairs))
    k, j = pairs[:, 0], pairs[:, 1]
    A[rows, k] += 1.0
    A[rows, K + k] -= 1.0
    A[rows, j] -= 1.0
    A[rows, K + j] += 1.0
    x, _ = solve(np.ones(2 * K), A, S[k, j])
    return x[:K] - x[K:]


def smooth(prob: SmoothingProblem) -> SmoothingSolution:
    """Closest compatible sample values in the l1 sense.

    Only the pairwise constraints that bind are handed to the simplex: we
    start from those violated by the raw data and add any violated by the
    current solution until none remain.  The restricted optimum is then
    feasible for, and hence optimal in, the full K^2-constraint LP.
    """
    K = prob.K
    P = positive_part_distances(prob.r)
    S = _slack(prob.y, P, prob.L)
    np.fill_diagonal(S, np.inf)
    q = np.zeros(K)
    active = np.zeros((K, K), dtype=bool)
    while True:
        viol = (q[:, None] - q[None, :] - S) > PIVOT_TOL
        new = viol & ~active
        if not new.any():
            if viol.any():
                raise RuntimeError("active constraint violated after simplex solve")
            break
        active |= new
        q = _restricted_lp(K, np.argwhere(active), S)
    q[np.abs(q) < 1e-15] = 0.0
    rho = prob.y + q
    return SmoothingSolution(rho_tilde=rho, cost=float(np.abs(q).sum()), q=q)


def check_compatibility(rho_tilde, r, L, tol: float = COMPAT_TOL):
    """Return ``(compatible, worst_violation)`` over all K^2 pair constraints."""
    rho = np.asarray(rho_tilde, dtype=float)
    P = positive_part_distances(r)
    worst = float(np.max(rho[:, None] - rho[None, :] - L * P))
    worst = max(worst, 0.0)
    return worst <= tol, worst


def constraint_table(prob: SmoothingProblem) -> str:
    """Debug dump of the full constraint system as CSV (k, j, rhs)."""
    P = positive_part_distances(prob.r)
    S = _slack(prob.y, P, prob.L)
    lines = ["k,j,rhs"]
    for k in range(prob.K):
        for j in range(prob.K):
            if k != j:
                lines.append(f"{k},{j},{S[k, j]!r}")
    return "\n".join(lines) + "\n"
