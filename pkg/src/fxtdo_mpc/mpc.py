"""Observer-augmented nonlinear MPC solved by real-time iteration.

The prediction model is the translational quadrotor model with body rates as
inputs, ``x = [p, v, q]`` (10) and ``u = [T_c, omega_c]`` (4), plus a
disturbance estimate held constant over the horizon. The optimal control
problem is transcribed by multiple shooting (RK4 with forward sensitivities),
linearized Gauss-Newton style, condensed onto the inputs and solved with the
box-QP active-set solver in :mod:`.qp`.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core_math import _body_z, _quat_derivative
from .plant import GRAVITY
from .qp import QPError, qp_solve

NX = 10
NU = 4


@dataclass
class MpcWeights:
    q_p: np.ndarray = field(default_factory=lambda: np.full(3, 1500.0))
    q_v: np.ndarray = field(default_factory=lambda: np.full(3, 400.0))
    q_q: np.ndarray = field(default_factory=lambda: np.full(4, 500.0))
    r: np.ndarray = field(default_factory=lambda: np.array([1.0, 10.0, 10.0, 10.0]))
    p_p: np.ndarray = None
    p_v: np.ndarray = None
    p_q: np.ndarray = None

    def __post_init__(self):
        for name in ("q_p", "q_v", "q_q", "r", "p_p", "p_v", "p_q"):
            val = getattr(self, name)
            if val is None:
                val = getattr(self, "q_" + name[2:])
            val = np.asarray(val, dtype=float)
            if np.any(val < 0):
                raise ValueError(f"weight {name} must be non-negative")
            setattr(self, name, val)
        if self.r[0] <= 0:
            raise ValueError("thrust weight must be positive")

    @property
    def stage(self):
        return np.concatenate([self.q_p, self.q_v, self.q_q])

    @property
    def terminal(self):
        return np.concatenate([self.p_p, self.p_v, self.p_q])


@dataclass
class MpcConfig:
    horizon: int = 10
    dt: float = 0.1
    thrust_min: float = 0.2 * GRAVITY
    thrust_max: float = 4.0 * GRAVITY
    omega_max: float = 3.0
    iterations: int = 1
    kkt_tol: float = 1e-8
    qp_max_iter: int = 200

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.thrust_min < 0 or self.thrust_max <= self.thrust_min:
            raise ValueError("invalid thrust bounds")

    @classmethod
    def for_mass(cls, mass, thrust_to_weight=4.0, **kw):
        return cls(thrust_min=0.2 * mass * GRAVITY,
                   thrust_max=thrust_to_weight * mass * GRAVITY, **kw)

    @property
    def u_min(self):
        return np.array([self.thrust_min, -self.omega_max, -self.omega_max, -self.omega_max])

    @property
    def u_max(self):
        return np.array([self.thrust_max, self.omega_max, self.omega_max, self.omega_max])


@dataclass
class OcpSolution:
    X: np.ndarray  # (N+1, 10)
    U: np.ndarray  # (N, 4)
    kkt: float = 0.0
    objective: float = 0.0
    status: str = "optimal"
    qp_iterations: int = 0
    active: np.ndarray = None
    x_init: np.ndarray = None  # optimized initial node when it is a decision variable

    @property
    def horizon(self):
        return len(self.U)


# -- prediction model -----------------------------------------------------

@njit(cache=True)
def _pred_f(x, u, f_hat, mass):
    dx = np.empty(10)
    dx[0:3] = x[3:6]
    zb = _body_z(x[6:10])
    dx[3:6] = -u[0] / mass * zb + f_hat / mass
    dx[5] += GRAVITY
    dx[6:10] = _quat_derivative(x[6:10], u[1:4])
    return dx


@njit(cache=True)
def _pred_jac(x, u, mass):
    qw, qx, qy, qz = x[6], x[7], x[8], x[9]
    T = u[0]
    wx, wy, wz = u[1], u[2], u[3]
    A = np.zeros((10, 10))
    B = np.zeros((10, 4))
    A[0, 3] = 1.0
    A[1, 4] = 1.0
    A[2, 5] = 1.0
    c = -T / mass
    # d(R e_z)/dq
    A[3, 6] = c * 2 * qy
    A[3, 7] = c * 2 * qz
    A[3, 8] = c * 2 * qw
    A[3, 9] = c * 2 * qx
    A[4, 6] = c * -2 * qx
    A[4, 7] = c * -2 * qw
    A[4, 8] = c * 2 * qz
    A[4, 9] = c * 2 * qy
    A[5, 7] = c * -4 * qx
    A[5, 8] = c * -4 * qy
    zb = _body_z(x[6:10])
    B[3, 0] = -zb[0] / mass
    B[4, 0] = -zb[1] / mass
    B[5, 0] = -zb[2] / mass
    # 0.5 * Omega(w)
    A[6, 7] = -0.5 * wx
    A[6, 8] = -0.5 * wy
    A[6, 9] = -0.5 * wz
    A[7, 6] = 0.5 * wx
    A[7, 8] = 0.5 * wz
    A[7, 9] = -0.5 * wy
    A[8, 6] = 0.5 * wy
    A[8, 7] = -0.5 * wz
    A[8, 9] = 0.5 * wx
    A[9, 6] = 0.5 * wz
    A[9, 7] = 0.5 * wy
    A[9, 8] = -0.5 * wx
    # 0.5 * Xi(q)
    B[6, 1] = -0.5 * qx
    B[6, 2] = -0.5 * qy
    B[6, 3] = -0.5 * qz
    B[7, 1] = 0.5 * qw
    B[7, 2] = -0.5 * qz
    B[7, 3] = 0.5 * qy
    B[8, 1] = 0.5 * qz
    B[8, 2] = 0.5 * qw
    B[8, 3] = -0.5 * qx
    B[9, 1] = -0.5 * qy
    B[9, 2] = 0.5 * qx
    B[9, 3] = 0.5 * qw
    return A, B


@njit(cache=True)
def _shoot(x0, u, f_hat, mass, dt):
    """One RK4 interval with forward sensitivities ``dx1/dx0`` and ``dx1/du``."""
    I = np.eye(10)
    k1 = _pred_f(x0, u, f_hat, mass)
    A1, B1 = _pred_jac(x0, u, mass)
    S1x = A1
    S1u = B1

    x2 = x0 + 0.5 * dt * k1
    k2 = _pred_f(x2, u, f_hat, mass)
    A2, B2 = _pred_jac(x2, u, mass)
    S2x = A2 @ (I + 0.5 * dt * S1x)
    S2u = A2 @ (0.5 * dt * S1u) + B2

    x3 = x0 + 0.5 * dt * k2
    k3 = _pred_f(x3, u, f_hat, mass)
    A3, B3 = _pred_jac(x3, u, mass)
    S3x = A3 @ (I + 0.5 * dt * S2x)
    S3u = A3 @ (0.5 * dt * S2u) + B3

    x4 = x0 + dt * k3
    k4 = _pred_f(x4, u, f_hat, mass)
    A4, B4 = _pred_jac(x4, u, mass)
    S4x = A4 @ (I + dt * S3x)
    S4u = A4 @ (dt * S3u) + B4

    x1 = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    Ax = I + dt / 6.0 * (S1x + 2.0 * S2x + 2.0 * S3x + S4x)
    Bu = dt / 6.0 * (S1u + 2.0 * S2u + 2.0 * S3u + S4u)
    return x1, Ax, Bu


@njit(cache=True)
def _rk4_only(x0, u, f_hat, mass, dt):
    k1 = _pred_f(x0, u, f_hat, mass)
    k2 = _pred_f(x0 + 0.5 * dt * k1, u, f_hat, mass)
    k3 = _pred_f(x0 + 0.5 * dt * k2, u, f_hat, mass)
    k4 = _pred_f(x0 + dt * k3, u, f_hat, mass)
    return x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _shoot_all(X, U, f_hat, mass, dt):
    N = U.shape[0]
    Xn = np.empty((N, 10))
    As = np.empty((N, 10, 10))
    Bs = np.empty((N, 10, 4))
    for k in range(N):
        x1, A, B = _shoot(X[k], U[k], f_hat, mass, dt)
        Xn[k] = x1
        As[k] = A
        Bs[k] = B
    return Xn, As, Bs


@njit(cache=True)
def _condense(As, Bs, gaps, dx0, free_init):
    """Stacked state steps ``d_x = G z + s`` for ``z = [d_x0?, d_u_0..d_u_{N-1}]``."""
    N = As.shape[0]
    off = 10 if free_init else 0
    nz = off + 4 * N
    G = np.zeros((N + 1, 10, nz))
    s = np.zeros((N + 1, 10))
    if free_init:
        for i in range(10):
            G[0, i, i] = 1.0
    else:
        s[0] = dx0
    for k in range(N):
        G[k + 1] = As[k] @ G[k]
        G[k + 1, :, off + 4 * k:off + 4 * k + 4] += Bs[k]
        s[k + 1] = As[k] @ s[k] + gaps[k]
    return G, s


def prediction_derivative(x, u, f_hat, mass):
    """Right-hand side of the prediction model (10-vector)."""
    x = np.asarray(x, dtype=float)
    nq = np.linalg.norm(x[6:10])
    if not 0.9 <= nq <= 1.1:
        raise ValueError(f"quaternion norm {nq:.3f} outside [0.9, 1.1]")
    return _pred_f(x, np.asarray(u, dtype=float), np.asarray(f_hat, dtype=float), mass)


def shoot(x0, u, f_hat, dt, mass=1.0):
    """Integrate one shooting interval; returns ``(x1, A, B)``."""
    return _shoot(np.asarray(x0, dtype=float), np.asarray(u, dtype=float),
                  np.asarray(f_hat, dtype=float), float(mass), float(dt))


def align_reference(X_ref, q_meas):
    """Flip reference quaternions into the hemisphere of ``q_meas`` node by node."""
    X_ref = np.array(X_ref, dtype=float)
    prev = np.asarray(q_meas, dtype=float)
    for k in range(len(X_ref)):
        if np.dot(X_ref[k, 6:10], prev) < 0:
            X_ref[k, 6:10] *= -1
        prev = X_ref[k, 6:10]
    return X_ref


@dataclass
class CondensedQP:
    H: np.ndarray
    g: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    G: np.ndarray  # (N+1, 10, nz)
    s: np.ndarray  # (N+1, 10)
    free_init: bool


def build_qp(x_init, X_ref, U_ref, f_hat, weights, config, X_lin, U_lin, mass=1.0,
             free_init=False, init_penalty=1e4, x_anchor=None):
    """Gauss-Newton QP around ``(X_lin, U_lin)`` condensed onto the step ``z``.

    The objective is half the tracking cost of the linearized trajectory.
    With ``free_init`` the first node is a decision variable penalized by
    ``init_penalty * |x_0 - x_anchor|^2`` instead of being pinned to ``x_init``.
    """
    N = config.horizon
    X_ref = np.asarray(X_ref, dtype=float)
    U_ref = np.asarray(U_ref, dtype=float)
    if X_ref.shape != (N + 1, NX) or U_ref.shape[0] < N or U_ref.shape[1] != NU:
        raise ValueError("reference dimensions do not match the horizon")
    if X_lin.shape != (N + 1, NX) or U_lin.shape != (N, NU):
        raise ValueError("linearization dimensions do not match the horizon")
    f_hat = np.asarray(f_hat, dtype=float)
    Xn, As, Bs = _shoot_all(X_lin, U_lin, f_hat, mass, config.dt)
    gaps = Xn - X_lin[1:]
    x_init = np.asarray(x_init, dtype=float)
    G, s = _condense(As, Bs, gaps, x_init - X_lin[0], free_init)

    nz = G.shape[2]
    off = NX if free_init else 0
    qw = np.tile(weights.stage, (N + 1, 1))
    qw[N] = weights.terminal
    resid = X_lin - X_ref[:N + 1] + s
    Gf = G.reshape(-1, nz)
    qf = qw.reshape(-1)
    H = Gf.T @ (qf[:, None] * Gf)
    g = Gf.T @ (qf * resid.reshape(-1))
    du = U_lin - U_ref[:N]
    rw = np.tile(weights.r, N)
    H[off:, off:] += np.diag(rw)
    g[off:] += rw * du.reshape(-1)
    lb = np.full(nz, -np.inf)
    ub = np.full(nz, np.inf)
    lb[off:] = (config.u_min - U_lin).reshape(-1)
    ub[off:] = (config.u_max - U_lin).reshape(-1)
    if free_init:
        anchor = x_init if x_anchor is None else np.asarray(x_anchor, dtype=float)
        H[:NX, :NX] += init_penalty * np.eye(NX)
        g[:NX] += init_penalty * (X_lin[0] - anchor)
    return CondensedQP(H, g, lb, ub, G, s, free_init)


def tracking_cost(X, U, X_ref, U_ref, weights):
    """Tracking objective ``sum dx'Q dx + du'R du + dx_N'P dx_N``."""
    N = len(U)
    dX = X - X_ref[:N + 1]
    dU = U - U_ref[:N]
    stage = np.sum(dX[:N] ** 2 * weights.stage) + np.sum(dU ** 2 * weights.r)
    return float(stage + np.sum(dX[N] ** 2 * weights.terminal))


def shift_warm_start(sol, f_hat, mass, dt):
    """Shift trajectories one node; the last input is repeated and the last
    state re-integrated from node N-1."""
    X = np.empty_like(sol.X)
    U = np.empty_like(sol.U)
    X[:-1] = sol.X[1:]
    U[:-1] = sol.U[1:]
    U[-1] = sol.U[-1]
    X[-1] = _rk4_only(X[-2], U[-1], np.asarray(f_hat, dtype=float), mass, dt)
    active = None
    if sol.active is not None:
        active = sol.active.copy()
        off = len(active) - NU * len(U)
        tail = active[off:]
        tail[:-NU] = tail[NU:]
        active[off:] = tail
    return OcpSolution(X, U, sol.kkt, sol.objective, sol.status, 0, active, sol.x_init)


class MpcController:
    """Receding-horizon controller performing RTI Gauss-Newton iterations.

    Parameters
    ----------
    mass : float
        Vehicle mass used by the prediction model.
    weights, config : MpcWeights, MpcConfig
    use_estimate : bool
        If False the disturbance estimate is ignored (plain MPC).
    free_init : bool
        Treat the first node as a decision variable tied to the measurement
        by ``init_penalty`` (nominal MPC of the tube scheme).
    """

    def __init__(self, mass=1.0, weights=None, config=None, use_estimate=True,
                 free_init=False, init_penalty=1e4):
        self.mass = mass
        self.weights = weights or MpcWeights()
        self.config = config or MpcConfig.for_mass(mass)
        self.use_estimate = use_estimate
        self.free_init = free_init
        self.init_penalty = init_penalty
        self.solution = None
        self.failures = 0

    def reset(self):
        self.solution = None
        self.failures = 0

    def _initial_guess(self, x_meas, X_ref, U_ref, f_hat):
        N = self.config.horizon
        if self.solution is None:
            X = X_ref[:N + 1].copy()
            U = np.clip(U_ref[:N], self.config.u_min, self.config.u_max)
            return OcpSolution(X, U)
        return shift_warm_start(self.solution, f_hat, self.mass, self.config.dt)

    def solve(self, x_meas, f_hat, X_ref, U_ref, iterations=None, warm=None):
        """Run RTI iterations and return the updated :class:`OcpSolution`."""
        x_meas = np.asarray(x_meas, dtype=float)[:NX]
        f_hat = np.zeros(3) if (f_hat is None or not self.use_estimate) \
            else np.asarray(f_hat, dtype=float)
        X_ref = align_reference(X_ref, x_meas[6:10])
        U_ref = np.asarray(U_ref, dtype=float)
        sol = warm if warm is not None else self._initial_guess(x_meas, X_ref, U_ref, f_hat)
        n_iter = self.config.iterations if iterations is None else iterations
        X, U, active = sol.X.copy(), sol.U.copy(), sol.active
        try:
            for _ in range(n_iter):
                qp = build_qp(x_meas, X_ref, U_ref, f_hat, self.weights, self.config,
                              X, U, self.mass, self.free_init, self.init_penalty)
                res = qp_solve(qp.H, qp.g, qp.lb, qp.ub, warm_active=active,
                               max_iter=self.config.qp_max_iter)
                dX = (qp.G.reshape(-1, qp.G.shape[2]) @ res.z).reshape(-1, NX) \
                    + qp.s
                off = NX if qp.free_init else 0
                X = X + dX
                U = np.clip(U + res.z[off:].reshape(-1, NU),
                            self.config.u_min, self.config.u_max)
                active = res.active
                if not (np.all(np.isfinite(X)) and np.all(np.isfinite(U))):
                    raise QPError("non-finite iterate")
        except (QPError, np.linalg.LinAlgError) as exc:
            self.failures += 1
            degraded = self._initial_guess(x_meas, X_ref, U_ref, f_hat)
            degraded.status = f"failed: {exc}"
            self.solution = degraded
            return degraded
        self.failures = 0
        status = res.status
        out = OcpSolution(X, U, res.kkt, tracking_cost(X, U, X_ref, U_ref, self.weights),
                          status, res.iterations, active,
                          X[0].copy() if self.free_init else None)
        self.solution = out
        return out

    def residual(self, x_meas, f_hat, X_ref, U_ref, sol=None):
        """Size of the full Gauss-Newton step (states and inputs) at ``sol``.

        It vanishes exactly when the trajectory is feasible and optimal.
        """
        sol = sol or self.solution
        x_meas = np.asarray(x_meas, dtype=float)[:NX]
        f_hat = np.zeros(3) if (f_hat is None or not self.use_estimate) \
            else np.asarray(f_hat, dtype=float)
        X_ref = align_reference(X_ref, x_meas[6:10])
        qp = build_qp(x_meas, X_ref, np.asarray(U_ref, dtype=float), f_hat, self.weights,
                      self.config, sol.X, sol.U, self.mass, self.free_init,
                      self.init_penalty)
        res = qp_solve(qp.H, qp.g, qp.lb, qp.ub)
        dX = qp.G.reshape(-1, qp.G.shape[2]) @ res.z + qp.s.reshape(-1)
        return float(max(np.abs(dX).max(), np.abs(res.z).max()))

    def command(self, x_meas, f_hat, X_ref, U_ref):
        sol = self.solve(x_meas, f_hat, X_ref, U_ref)
        return sol.U[0].copy(), sol


def rti_step(controller, x_meas, f_hat, X_ref, U_ref):
    """One control period of the real-time iteration: returns ``(u0, solution)``."""
    return controller.command(x_meas, f_hat, X_ref, U_ref)
