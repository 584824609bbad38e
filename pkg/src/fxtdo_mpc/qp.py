"""Dense primal active-set solver for strictly convex box-constrained QPs.

Solves ``min 0.5 z'Hz + g'z  s.t.  lb <= z <= ub``. Infinite bounds are
allowed. Entering and leaving constraints follow the smallest-index rule,
which keeps the iteration deterministic and cycle-free.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

FREE, LOWER, UPPER = 0, -1, 1


class QPError(RuntimeError):
    pass


@dataclass
class QPResult:
    z: np.ndarray
    dual: np.ndarray  # bound multipliers; > 0 at lower, < 0 at upper
    active: np.ndarray  # -1 lower, +1 upper, 0 free
    kkt: float
    iterations: int
    status: str


@njit(cache=True)
def _active_set(H, g, lb, ub, z0, w0, max_iter, tol):
    n = len(g)
    z = z0.copy()
    W = w0.copy()
    for i in range(n):
        if W[i] == -1 and np.isfinite(lb[i]):
            z[i] = lb[i]
        elif W[i] == 1 and np.isfinite(ub[i]):
            z[i] = ub[i]
        else:
            W[i] = 0
            z[i] = min(max(z[i], lb[i]), ub[i])

    status = 1  # max_iter
    it = 0
    while it < max_iter:
        it += 1
        nf = 0
        for i in range(n):
            if W[i] == 0:
                nf += 1
        if nf > 0:
            free = np.empty(nf, dtype=np.int64)
            k = 0
            for i in range(n):
                if W[i] == 0:
                    free[k] = i
                    k += 1
            Hff = np.empty((nf, nf))
            rhs = np.empty(nf)
            for a in range(nf):
                s = g[free[a]]
                for j in range(n):
                    if W[j] != 0:
                        s += H[free[a], j] * z[j]
                rhs[a] = -s
                for b in range(nf):
                    Hff[a, b] = H[free[a], free[b]]
            L = np.linalg.cholesky(Hff)
            y = np.linalg.solve(L, rhs)
            zf = np.linalg.solve(L.T, y)

            alpha = 1.0
            block = -1
            side = 0
            for a in range(nf):
                i = free[a]
                p = zf[a] - z[i]
                if p < 0.0 and np.isfinite(lb[i]):
                    r = (lb[i] - z[i]) / p
                    if r < alpha:
                        alpha = max(r, 0.0)
                        block = i
                        side = -1
                elif p > 0.0 and np.isfinite(ub[i]):
                    r = (ub[i] - z[i]) / p
                    if r < alpha:
                        alpha = max(r, 0.0)
                        block = i
                        side = 1
            for a in range(nf):
                i = free[a]
                z[i] = z[i] + alpha * (zf[a] - z[i])
            if block >= 0:
                W[block] = side
                z[block] = lb[block] if side == -1 else ub[block]
                continue

        grad = H @ z + g
        leave = -1
        for i in range(n):
            if (W[i] == -1 and grad[i] < -tol) or (W[i] == 1 and grad[i] > tol):
                leave = i
                break
        if leave < 0:
            status = 0
            break
        W[leave] = 0
    return z, W, it, status


def kkt_residual(H, g, lb, ub, z, dual, active=None):
    """Max of stationarity, primal infeasibility, dual sign and complementarity."""
    stat = np.abs(H @ z + g - dual)
    sign = np.zeros_like(z)
    if active is not None:
        sign = np.where(active == LOWER, np.maximum(-dual, 0.0),
                        np.where(active == UPPER, np.maximum(dual, 0.0), 0.0))
    prim = np.maximum(np.maximum(lb - z, z - ub), 0.0)
    dual_lo = np.maximum(dual, 0.0)
    dual_hi = np.maximum(-dual, 0.0)
    with np.errstate(invalid="ignore"):
        comp = np.maximum(np.nan_to_num(dual_lo * (z - lb)),
                          np.nan_to_num(dual_hi * (ub - z)))
    return float(max(stat.max(initial=0.0), prim.max(initial=0.0),
                     comp.max(initial=0.0), sign.max(initial=0.0)))


def qp_solve(H, g, lb, ub, warm_active=None, z0=None, max_iter=200, tol=1e-10):
    """Solve the box QP; ``warm_active`` seeds the working set.

    Raises ``QPError`` if ``H`` is not positive definite. Hitting
    ``max_iter`` returns the last iterate with status ``"max_iter"``.
    """
    H = np.ascontiguousarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = len(g)
    lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    if H.shape != (n, n) or lb.shape != (n,) or ub.shape != (n,):
        raise ValueError("QP dimension mismatch")
    if np.any(lb > ub):
        raise QPError("infeasible bounds")
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise QPError("Hessian is not positive definite") from None
    w0 = np.zeros(n, dtype=np.int64) if warm_active is None else \
        np.asarray(warm_active, dtype=np.int64)
    z0 = np.zeros(n) if z0 is None else np.asarray(z0, dtype=float)
    z, W, iters, status = _active_set(H, g, lb, ub, z0, w0, max_iter, tol)
    grad = H @ z + g
    dual = np.where(W != 0, grad, 0.0)
    return QPResult(z, dual, W, kkt_residual(H, g, lb, ub, z, dual, W), int(iters),
                    "optimal" if status == 0 else "max_iter")
