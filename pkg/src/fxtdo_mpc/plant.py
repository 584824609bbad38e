"""Rigid-body quadrotor plant with injected force/torque disturbances."""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core_math import _body_z, _check_unit, _quat_derivative

GRAVITY = 9.81
G_VEC = np.array([0.0, 0.0, GRAVITY])

# the published rotor offsets (9.4e-9 m) and torque coefficient (2.5e-9 m) are
# not plausible geometry, so the mixer uses a 0.17 m arm instead.
_ARM = 0.17


@dataclass
class QuadParams:
    mass: float = 1.0
    inertia: np.ndarray = field(
        default_factory=lambda: np.diag([2.64e-3, 2.64e-3, 4.96e-3]))
    arm_length: float = _ARM
    thrust_to_weight: float = 4.0
    torque_limits: np.ndarray = field(
        default_factory=lambda: np.array([0.5, 0.5, 0.5]))
    d_x: float = _ARM / np.sqrt(2.0)
    d_y: float = _ARM / np.sqrt(2.0)
    c_tau: float = 0.013

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)
        if self.inertia.shape == (3,):
            self.inertia = np.diag(self.inertia)
        self.torque_limits = np.asarray(self.torque_limits, dtype=float)
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.thrust_to_weight <= 1:
            raise ValueError("thrust_to_weight must exceed 1")
        if np.any(np.linalg.eigvalsh(self.inertia) <= 0):
            raise ValueError("inertia must be positive definite")

    @property
    def inertia_inv(self):
        return np.linalg.inv(self.inertia)

    @property
    def max_thrust(self):
        return self.thrust_to_weight * self.mass * GRAVITY

    @property
    def hover_thrust(self):
        return self.mass * GRAVITY


@dataclass
class QuadState:
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))
    w: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def to_vector(self):
        return np.concatenate([self.p, self.v, self.q, self.w]).astype(float)

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[0:3].copy(), x[3:6].copy(), x[6:10].copy(), x[10:13].copy())


@dataclass
class Wrench:
    thrust: float
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.thrust = float(self.thrust)
        self.torque = np.asarray(self.torque, dtype=float)


@njit(cache=True)
def _derivative(x, thrust, torque, f_d, tau_d, mass, J, J_inv):
    q = x[6:10]
    w = x[10:13]
    dx = np.empty(13)
    dx[0:3] = x[3:6]
    zb = _body_z(q)
    dx[3] = -thrust / mass * zb[0] + f_d[0] / mass
    dx[4] = -thrust / mass * zb[1] + f_d[1] / mass
    dx[5] = -thrust / mass * zb[2] + GRAVITY + f_d[2] / mass
    dx[6:10] = _quat_derivative(q, w)
    dx[10:13] = J_inv @ (torque - np.cross(w, J @ w) + tau_d)
    return dx


@njit(cache=True)
def _rk4_step(x, thrust, torque, f_d, tau_d, mass, J, J_inv, h):
    k1 = _derivative(x, thrust, torque, f_d, tau_d, mass, J, J_inv)
    k2 = _derivative(x + 0.5 * h * k1, thrust, torque, f_d, tau_d, mass, J, J_inv)
    k3 = _derivative(x + 0.5 * h * k2, thrust, torque, f_d, tau_d, mass, J, J_inv)
    k4 = _derivative(x + h * k3, thrust, torque, f_d, tau_d, mass, J, J_inv)
    out = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out[6:10] = out[6:10] / np.sqrt(np.sum(out[6:10] ** 2))
    return out


def _state_vector(s):
    return s.to_vector() if isinstance(s, QuadState) else np.asarray(s, dtype=float)


def _check_wrench(w, params, tol=1e-9):
    if w.thrust < -tol or w.thrust > params.max_thrust + tol:
        raise ValueError(f"thrust {w.thrust} outside [0, {params.max_thrust}]")
    if np.any(np.abs(w.torque) > params.torque_limits + tol):
        raise ValueError("torque exceeds limits")


def dynamics_derivative(state, wrench, f_d, tau_d, params):
    """Time derivative of the 13-vector ``[p, v, q, w]``."""
    x = _state_vector(state)
    if not np.all(np.isfinite(x)):
        raise ValueError("state contains non-finite values")
    _check_unit(x[6:10], 1e-6)
    _check_wrench(wrench, params)
    return _derivative(x, wrench.thrust, wrench.torque,
                       np.asarray(f_d, dtype=float), np.asarray(tau_d, dtype=float),
                       params.mass, params.inertia, params.inertia_inv)


def rk4_step(state, wrench, f_d, tau_d, params, h):
    """Advance one classical RK4 step with inputs held, then renormalize q."""
    if not 0 < h <= 0.01:
        raise ValueError("step size must lie in (0, 0.01]")
    x = _rk4_step(_state_vector(state), wrench.thrust, wrench.torque,
                  np.asarray(f_d, dtype=float), np.asarray(tau_d, dtype=float),
                  params.mass, params.inertia, params.inertia_inv, h)
    return QuadState.from_vector(x)


def mixer_matrix(params):
    """Map single rotor thrusts ``T0..T3`` to ``[T_c, tau_x, tau_y, tau_z]``."""
    dx, dy, c = params.d_x, params.d_y, params.c_tau
    return np.array([
        [1.0, 1.0, 1.0, 1.0],
        [-dy, -dy, dy, dy],
        [-dx, dx, dx, -dx],
        [-c, c, -c, c],
    ])


def mix_motors(thrusts, params):
    thrusts = np.asarray(thrusts, dtype=float)
    if np.any(thrusts < 0):
        raise ValueError("rotor thrusts must be non-negative")
    out = mixer_matrix(params) @ thrusts
    return Wrench(out[0], out[1:])


def allocate_motors(wrench, params):
    """Rotor thrusts realising ``wrench``, clamped to the per-rotor range.

    Returns ``(thrusts, saturated)``.
    """
    target = np.concatenate(([wrench.thrust], wrench.torque))
    raw = np.linalg.solve(mixer_matrix(params), target)
    t_max = params.max_thrust / 4.0
    clipped = np.clip(raw, 0.0, t_max)
    saturated = bool(np.any(np.abs(clipped - raw) > 1e-12))
    return clipped, saturated


def saturate_wrench(wrench, params):
    lim = params.torque_limits
    return Wrench(np.clip(wrench.thrust, 0.0, params.max_thrust),
                  np.clip(wrench.torque, -lim, lim))


class Quadrotor:
    """Stateful plant stepped at a fixed rate.

    With ``use_motors`` the commanded wrench is routed through per-rotor
    allocation and clamping before it reaches the rigid body.
    """

    def __init__(self, params=None, state=None, use_motors=False):
        self.params = params or QuadParams()
        self.x = _state_vector(state if state is not None else QuadState())
        self.use_motors = use_motors
        self.saturated = False
        self._J = self.params.inertia
        self._J_inv = self.params.inertia_inv

    @property
    def state(self):
        return QuadState.from_vector(self.x)

    def applied_wrench(self, wrench):
        w = saturate_wrench(wrench, self.params)
        if self.use_motors:
            thrusts, self.saturated = allocate_motors(w, self.params)
            w = mix_motors(thrusts, self.params)
        return w

    def step(self, wrench, f_d, tau_d, h):
        w = self.applied_wrench(wrench)
        self.x = _rk4_step(self.x, w.thrust, w.torque, f_d, tau_d,
                           self.params.mass, self._J, self._J_inv, h)
        return w
