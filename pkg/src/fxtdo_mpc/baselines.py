"""Comparison outer-loop controllers.

All outer controllers share one call signature,
``update(x_meas, f_hat, ref) -> OuterCommand``, where ``x_meas`` is the
13-element plant state, ``f_hat`` the current disturbance estimate (ignored
by controllers that do not use one) and ``ref`` a :class:`HorizonRef`
window of the precomputed reference table.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .core_math import quat_conjugate, quat_multiply
from .mpc import MpcConfig, MpcController, MpcWeights, rti_step
from .plant import GRAVITY
from .reference import FlatOutput, _flat_arrays

CONTROLLERS = ("pid", "mpc", "rtmpc", "hgdo-mpc", "fxtdo-mpc")


@dataclass
class HorizonRef:
    """Reference window starting at the current control instant.

    ``X`` and ``U`` hold ``N + 1`` rows of ``[p, v, q]`` and ``[T, omega]``;
    ``acc`` and ``yaw`` hold the matching flat-output acceleration and yaw.
    """

    X: np.ndarray
    U: np.ndarray
    acc: np.ndarray
    yaw: np.ndarray


@dataclass
class OuterCommand:
    thrust: float
    omega: np.ndarray
    status: str = "ok"
    kkt: float = 0.0


# --------------------------------------------------------------------- PID


@dataclass
class PidGains:
    kp: np.ndarray = field(default_factory=lambda: np.array([6.0, 6.0, 8.0]))
    ki: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5, 1.0]))
    kd: np.ndarray = field(default_factory=lambda: np.array([4.0, 4.0, 5.0]))
    k_att: float = 8.0
    integral_limit: float = 2.0
    # weight on the reference acceleration feedforward
    feedforward: float = 0.0

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            val = np.asarray(getattr(self, name), dtype=float)
            if val.shape != (3,) or np.any(val < 0):
                raise ValueError(f"{name} must be three non-negative gains")
            setattr(self, name, val)
        if self.k_att < 0:
            raise ValueError("attitude gain must be non-negative")
        if self.integral_limit <= 0:
            raise ValueError("integral limit must be positive")


def attitude_rate_command(q, q_des, k_att):
    """Proportional rate command ``2 k sgn(w) vec(q^-1 q_des)`` (shortest way)."""
    qe = quat_multiply(quat_conjugate(q), q_des)
    sgn = 1.0 if qe[0] >= 0 else -1.0
    return 2.0 * k_att * sgn * qe[1:]


class PidController:
    """Cascaded position PID, flatness thrust/attitude map and attitude P loop."""

    name = "pid"
    observer = None

    def __init__(self, mass=1.0, gains=None, dt=0.01, config=None):
        self.mass = mass
        self.gains = gains or PidGains()
        self.dt = dt
        self.config = config or MpcConfig.for_mass(mass)
        self.reset()

    def reset(self):
        self.integral = np.zeros(3)

    def desired_acceleration(self, x_meas, p_ref, v_ref, a_ref):
        g = self.gains
        e = p_ref - x_meas[0:3]
        e_v = v_ref - x_meas[3:6]
        # clamp the integral contribution, not the raw integral
        lim = g.integral_limit
        safe_ki = np.where(g.ki > 0, g.ki, 1.0)
        self.integral = np.clip(self.integral + e * self.dt, -lim / safe_ki, lim / safe_ki)
        i_term = np.where(g.ki > 0, g.ki * self.integral, 0.0)
        return g.feedforward * a_ref + g.kp * e + g.kd * e_v + i_term

    def update(self, x_meas, f_hat, ref):
        x_meas = np.asarray(x_meas, dtype=float)
        a_des = self.desired_acceleration(x_meas, ref.X[0, 0:3], ref.X[0, 3:6], ref.acc[0])
        flat = FlatOutput(ref.X[0, 0:3], ref.X[0, 3:6], a_des, np.zeros(3),
                          np.array([ref.yaw[0]]), np.zeros(1))
        thrust, quats, _ = _flat_arrays(flat, self.mass)
        omega = attitude_rate_command(x_meas[6:10], quats[0], self.gains.k_att)
        c = self.config
        return OuterCommand(float(np.clip(thrust[0], c.thrust_min, c.thrust_max)),
                            np.clip(omega, -c.omega_max, c.omega_max))


def pid_step(controller, x_meas, ref):
    return controller.update(x_meas, None, ref)


# ------------------------------------------------------------ Riccati / tube


class RiccatiError(RuntimeError):
    pass


def riccati_residual(A, B, Q, R, P):
    BtPA = B.T @ P @ A
    return np.abs(P - (Q + A.T @ P @ A - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA))).max()


def dare_solve(A, B, Q, R, tol=1e-10, max_iter=10_000):
    """Stabilizing solution of the discrete algebraic Riccati equation.

    Fixed-point (value) iteration from ``P = Q``. Returns ``(P, K)`` with
    ``K = (R + B'PB)^-1 B'PA`` so that ``u = -K x`` is the optimal feedback.
    Raises :class:`RiccatiError` if the iteration does not settle.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if np.any(np.linalg.eigvalsh(R) <= 0):
        raise ValueError("R must be positive definite")
    P = Q.copy()
    for _ in range(max_iter):
        # an unstabilizable pair diverges; report it through the error below
        with np.errstate(over="ignore", invalid="ignore"):
            BtPA = B.T @ P @ A
            P_next = Q + A.T @ P @ A - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA)
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)):
            break
        step = np.abs(P_next - P).max()
        P = P_next
        if step <= tol * max(1.0, np.abs(P).max()):
            K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
            if np.max(np.abs(np.linalg.eigvals(A - B @ K))) >= 1.0:
                break
            return P, K
    raise RiccatiError("Riccati iteration did not converge (unstabilizable pair?)")


def hover_linearization(mass=1.0, dt=0.1):
    """Discrete 9-state hover model in ``[dp, dv, dtheta]`` with ``[dT, domega]``.

    ``dtheta`` is the small body-attitude error; yaw only enters through
    its own integrator.
    """
    Ac = np.zeros((9, 9))
    Ac[0:3, 3:6] = np.eye(3)
    Ac[3, 7] = -GRAVITY
    Ac[4, 6] = GRAVITY
    Bc = np.zeros((9, 4))
    Bc[5, 0] = -1.0 / mass
    Bc[6:9, 1:4] = np.eye(3)
    M = np.zeros((13, 13))
    M[:9, :9] = Ac * dt
    M[:9, 9:] = Bc * dt
    E = expm(M)
    return E[:9, :9], E[:9, 9:]


def tube_weights(weights):
    # small-angle error theta ~ 2 vec(dq), so the quaternion weight scales by 1/4
    Q = np.diag(np.concatenate([weights.q_p, weights.q_v, weights.q_q[1:] / 4.0]))
    return Q, np.diag(weights.r)


@dataclass
class TubeConfig:
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    K: np.ndarray  # ancillary feedback is u = u_nom - K (x - x_nom)

    @property
    def closed_loop_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.A - self.B @ self.K))))


def make_tube(mass=1.0, weights=None, dt=0.1):
    A, B = hover_linearization(mass, dt)
    Q, R = tube_weights(weights or MpcWeights())
    P, K = dare_solve(A, B, Q, R)
    return TubeConfig(A, B, Q, R, P, K)


def error_state(x, x_nom):
    """9-state deviation ``[dp, dv, dtheta]`` of ``x`` from ``x_nom`` (both [p, v, q])."""
    qe = quat_multiply(quat_conjugate(x_nom[6:10]), x[6:10])
    if qe[0] < 0:
        qe = -qe
    return np.concatenate([x[0:6] - x_nom[0:6], 2.0 * qe[1:]])


class TubeMpcController:
    """Nominal MPC with free initial state plus Riccati ancillary feedback.

    The nominal problem ignores any disturbance estimate. Its first node is
    a decision variable tied to the measurement by a quadratic penalty.
    """

    name = "rtmpc"
    observer = None

    def __init__(self, mass=1.0, weights=None, config=None, init_penalty=1e4, tube=None):
        self.weights = weights or MpcWeights()
        self.mpc = MpcController(mass, self.weights, config, use_estimate=False,
                                 free_init=True, init_penalty=init_penalty)
        self.tube = tube or make_tube(mass, self.weights, self.mpc.config.dt)
        self.last_feedback = np.zeros(4)

    @property
    def failures(self):
        return self.mpc.failures

    def reset(self):
        self.mpc.reset()

    def update(self, x_meas, f_hat, ref):
        x = np.asarray(x_meas, dtype=float)[:10]
        u_nom, sol = rti_step(self.mpc, x, None, ref.X, ref.U)
        x_nom = sol.x_init if sol.x_init is not None else sol.X[0]
        self.last_feedback = -self.tube.K @ error_state(x, x_nom)
        u = u_nom + self.last_feedback
        c = self.mpc.config
        u = np.clip(u, c.u_min, c.u_max)
        return OuterCommand(float(u[0]), u[1:4], sol.status, float(sol.kkt))


def rtmpc_step(controller, x_meas, ref):
    return controller.update(x_meas, None, ref)


# --------------------------------------------------------------------- MPC


class ObserverMpc:
    """RTI MPC fed by a disturbance observer (``observer`` is the kind used)."""

    def __init__(self, name, observer, mass=1.0, weights=None, config=None):
        self.name = name
        self.observer = observer
        self.mpc = MpcController(mass, weights, config, use_estimate=observer is not None)

    @property
    def failures(self):
        return self.mpc.failures

    def reset(self):
        self.mpc.reset()

    def update(self, x_meas, f_hat, ref):
        u, sol = rti_step(self.mpc, np.asarray(x_meas, dtype=float)[:10],
                          f_hat if self.observer else None, ref.X, ref.U)
        return OuterCommand(float(u[0]), u[1:4], sol.status, float(sol.kkt))


def plain_mpc_step(controller, x_meas, ref):
    """Plain MPC: the disturbance estimate is fixed to zero."""
    return rti_step(controller, np.asarray(x_meas)[:10], None, ref.X, ref.U)


def hgdo_mpc_step(controller, x_meas, f_hat_hgdo, ref):
    return rti_step(controller, np.asarray(x_meas)[:10], f_hat_hgdo, ref.X, ref.U)


def fxtdo_mpc_step(controller, x_meas, f_hat_fxtdo, ref):
    return rti_step(controller, np.asarray(x_meas)[:10], f_hat_fxtdo, ref.X, ref.U)


def make_controller(name, mass=1.0, weights=None, config=None, pid_gains=None,
                    init_penalty=1e4, control_dt=0.01):
    """Build an outer controller by id (one of :data:`CONTROLLERS`)."""
    if name == "pid":
        return PidController(mass, pid_gains, dt=control_dt, config=config)
    if name == "mpc":
        return ObserverMpc(name, None, mass, weights, config)
    if name == "hgdo-mpc":
        return ObserverMpc(name, "hgdo", mass, weights, config)
    if name == "fxtdo-mpc":
        return ObserverMpc(name, "fxtdo", mass, weights, config)
    if name == "rtmpc":
        return TubeMpcController(mass, weights, config, init_penalty)
    raise ValueError(f"unknown controller {name!r}; expected one of {', '.join(CONTROLLERS)}")
