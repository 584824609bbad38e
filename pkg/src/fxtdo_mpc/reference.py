"""Flat-output trajectories and their conversion to state/input references.

The flat outputs are position and yaw. ``flat_to_reference`` maps them (with
derivatives up to jerk) to the reference state ``[p, v, q]`` and input
``[T, omega]`` of the translational model. All functions accept either a
scalar time or an array of times; array inputs give ``(n, 3)`` fields.
"""

from dataclasses import dataclass

import numpy as np

from .core_math import rotation_to_quat
from .plant import G_VEC


@dataclass
class FlatOutput:
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    j: np.ndarray
    psi: np.ndarray
    psi_dot: np.ndarray


@dataclass
class ReferencePoint:
    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    thrust: float
    omega: np.ndarray
    omega_dot: np.ndarray

    @property
    def x(self):
        return np.concatenate([self.p, self.v, self.q])

    @property
    def u(self):
        return np.concatenate([[self.thrust], self.omega])


@dataclass
class EightTrajectoryParams:
    r_x: float = 3.0
    r_y: float = 5.0
    r_z: float = -1.0
    k_t: float = 0.01

    def __post_init__(self):
        if self.r_x <= 0 or self.r_y <= 0:
            raise ValueError("r_x and r_y must be positive")


def _sin_chain(phi, d1, d2, d3):
    s, c = np.sin(phi), np.cos(phi)
    return (s, c * d1, -s * d1**2 + c * d2,
            -c * d1**3 - 3 * s * d1 * d2 + c * d3)


def _cos_chain(phi, d1, d2, d3):
    s, c = np.sin(phi), np.cos(phi)
    return (c, -s * d1, -c * d1**2 - s * d2,
            s * d1**3 - 3 * c * d1 * d2 - s * d3)


def eight_trajectory(t, params=None):
    """Figure-eight ``[r_x sin(s)cos(s), r_y cos(s) - r_y, r_z]`` with s = k t^2."""
    params = params or EightTrajectoryParams()
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    k = params.k_t
    zero = np.zeros_like(t)
    # r_x sin(s)cos(s) = (r_x/2) sin(2s)
    xs = _sin_chain(2 * k * t**2, 4 * k * t, 4 * k + zero, zero)
    ys = _cos_chain(k * t**2, 2 * k * t, 2 * k + zero, zero)
    comps = []
    for n in range(4):
        px = 0.5 * params.r_x * xs[n]
        py = params.r_y * ys[n] - (params.r_y if n == 0 else 0.0)
        pz = (params.r_z + zero) if n == 0 else zero
        comps.append(np.stack([px, py, pz], axis=-1))
    return FlatOutput(*comps, psi=zero.copy(), psi_dot=zero.copy())


def hover_reference(p_hover, t=0.0):
    """Constant-position flat output; identical for every ``t``."""
    p = np.asarray(p_hover, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = t.shape + (3,)
    zero = np.zeros(shape)
    return FlatOutput(np.broadcast_to(p, shape).copy(), zero, zero.copy(), zero.copy(),
                      np.zeros(t.shape), np.zeros(t.shape))


class EightTrajectory:
    def __init__(self, params=None):
        self.params = params or EightTrajectoryParams()

    def __call__(self, t):
        return eight_trajectory(t, self.params)


class HoverTrajectory:
    def __init__(self, p_hover=(0.0, 0.0, -1.0)):
        self.p_hover = np.asarray(p_hover, dtype=float)

    def __call__(self, t):
        return hover_reference(self.p_hover, t)


def _flat_arrays(f, mass):
    a = np.atleast_2d(f.a)
    j = np.atleast_2d(f.j)
    psi = np.atleast_1d(f.psi)
    psi_dot = np.atleast_1d(f.psi_dot)

    t_vec = mass * (G_VEC - a)
    thrust = np.linalg.norm(t_vec, axis=1)
    if np.any(thrust < 1e-6 * mass):
        raise ValueError("degenerate free-fall reference: thrust direction undefined")
    z_b = t_vec / thrust[:, None]
    x_c = np.stack([np.cos(psi), np.sin(psi), np.zeros_like(psi)], axis=1)
    y_c = np.stack([-np.sin(psi), np.cos(psi), np.zeros_like(psi)], axis=1)
    x_b = np.cross(y_c, z_b)
    x_b /= np.linalg.norm(x_b, axis=1)[:, None]
    y_b = np.cross(z_b, x_b)

    thrust_dot = -mass * np.einsum("ij,ij->i", j, z_b)
    h = (-mass * j - thrust_dot[:, None] * z_b) / thrust[:, None]
    w_y = np.einsum("ij,ij->i", h, x_b)
    w_x = -np.einsum("ij,ij->i", h, y_b)
    w_z = (w_y * np.einsum("ij,ij->i", z_b, y_c)
           + psi_dot * np.einsum("ij,ij->i", x_b, x_c)) / np.einsum("ij,ij->i", y_b, y_c)
    omega = np.stack([w_x, w_y, w_z], axis=1)

    quats = np.empty((len(thrust), 4))
    for i in range(len(thrust)):
        quats[i] = rotation_to_quat(np.column_stack([x_b[i], y_b[i], z_b[i]]))
    return thrust, quats, omega


def _align_sequence(quats, q_prev=None):
    out = quats.copy()
    prev = q_prev
    for i in range(len(out)):
        if prev is not None and np.dot(out[i], prev) < 0:
            out[i] = -out[i]
        prev = out[i]
    return out


def flat_to_reference(f, mass):
    """Reference state and input for a single flat-output sample.

    Body z (pointing down through the rotors) is aligned with ``g - a``, so
    that ``-T R e_z / m + g`` reproduces the reference acceleration. The
    reference angular acceleration is returned as zero.
    """
    thrust, quats, omega = _flat_arrays(f, mass)
    if np.ndim(f.p) == 1:
        return ReferencePoint(np.asarray(f.p, dtype=float).copy(),
                              np.asarray(f.v, dtype=float).copy(),
                              quats[0], float(thrust[0]), omega[0], np.zeros(3))
    raise ValueError("flat_to_reference expects a single sample; use reference_arrays")


def reference_arrays(traj, times, mass, q_prev=None):
    """Stacked references at ``times``: ``X (n, 10)`` and ``U (n, 4)``.

    Quaternions are sign-aligned along the sequence (and to ``q_prev`` if
    given) so consecutive entries have a non-negative dot product.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    f = traj(times)
    thrust, quats, omega = _flat_arrays(f, mass)
    quats = _align_sequence(quats, q_prev)
    X = np.hstack([np.atleast_2d(f.p), np.atleast_2d(f.v), quats])
    U = np.hstack([thrust[:, None], omega])
    return X, U


def sample_horizon(traj, t0, N, dt, mass=1.0):
    """``N + 1`` reference points at ``t0, t0 + dt, ..., t0 + N dt``."""
    if N < 1:
        raise ValueError("horizon must have at least one step")
    times = t0 + dt * np.arange(N + 1)
    X, U = reference_arrays(traj, times, mass)
    return [ReferencePoint(X[k, 0:3], X[k, 3:6], X[k, 6:10], float(U[k, 0]),
                           U[k, 1:4], np.zeros(3)) for k in range(N + 1)]


def stack_references(refs):
    X = np.array([r.x for r in refs])
    U = np.array([r.u for r in refs])
    return X, U
