"""Quaternion algebra and the multivariable signed power.

Quaternions are scalar-first ``[w, x, y, z]`` numpy arrays. World frame is
north-east-down, body frame is forward-right-down.

The ``_``-prefixed kernels are numba-compiled and skip validation; they are
used by the simulation and MPC hot loops.
"""

import numpy as np
from numba import njit

UNIT_TOL = 1e-6


@njit(cache=True)
def _signed_power(x, a):
    m = max(abs(x[0]), abs(x[1]), abs(x[2]))
    if m == 0.0:
        return np.zeros(3)
    if a == 1.0:
        return x.copy()
    # scale before squaring so tiny vectors do not underflow
    u = x / m
    n = m * np.sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
    return n ** a * (x / n)


@njit(cache=True)
def _rotation(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3))
    R[0, 0] = 1.0 - 2.0 * y * y - 2.0 * z * z
    R[0, 1] = 2.0 * (x * y - w * z)
    R[0, 2] = 2.0 * (w * y + x * z)
    R[1, 0] = 2.0 * (x * y + w * z)
    R[1, 1] = 1.0 - 2.0 * x * x - 2.0 * z * z
    R[1, 2] = 2.0 * (y * z - w * x)
    R[2, 0] = 2.0 * (x * z - w * y)
    R[2, 1] = 2.0 * (y * z + w * x)
    R[2, 2] = 1.0 - 2.0 * x * x - 2.0 * y * y
    return R


@njit(cache=True)
def _body_z(q):
    """Third column of the rotation matrix: body down-axis in world."""
    w, x, y, z = q[0], q[1], q[2], q[3]
    out = np.empty(3)
    out[0] = 2.0 * (w * y + x * z)
    out[1] = 2.0 * (y * z - w * x)
    out[2] = 1.0 - 2.0 * x * x - 2.0 * y * y
    return out


@njit(cache=True)
def _rate_matrix(omega):
    wx, wy, wz = omega[0], omega[1], omega[2]
    M = np.empty((4, 4))
    M[0, 0] = 0.0
    M[0, 1] = -wx
    M[0, 2] = -wy
    M[0, 3] = -wz
    M[1, 0] = wx
    M[1, 1] = 0.0
    M[1, 2] = wz
    M[1, 3] = -wy
    M[2, 0] = wy
    M[2, 1] = -wz
    M[2, 2] = 0.0
    M[2, 3] = wx
    M[3, 0] = wz
    M[3, 1] = wy
    M[3, 2] = -wx
    M[3, 3] = 0.0
    return M


@njit(cache=True)
def _quat_derivative(q, omega):
    return 0.5 * (_rate_matrix(omega) @ q)


@njit(cache=True)
def _quat_multiply(p, q):
    out = np.empty(4)
    out[0] = p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3]
    out[1] = p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2]
    out[2] = p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1]
    out[3] = p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0]
    return out


def _as_quat(q):
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise ValueError(f"quaternion must have shape (4,), got {q.shape}")
    return q


def _check_unit(q, tol=UNIT_TOL):
    n = np.linalg.norm(q)
    if abs(n - 1.0) > tol:
        raise ValueError(f"quaternion is not unit-norm (|q| = {n:.9g})")


def signed_power(x, a):
    """Multivariable signed power ``|x|**(a-1) * x``.

    With ``a = 0`` this is the vector signum ``x/|x|``. The zero vector maps
    to zero for every exponent.
    """
    x = np.asarray(x, dtype=float)
    if not np.isfinite(a) or a < 0:
        raise ValueError("exponent must be finite and non-negative")
    return _signed_power(x, float(a))


def quat_to_rotation(q):
    """Body-to-world rotation matrix of a unit quaternion."""
    q = _as_quat(q)
    _check_unit(q)
    return _rotation(q)


def quat_derivative(q, omega):
    """Time derivative ``0.5 * q (x) [0, omega]`` for body rates ``omega``."""
    q = _as_quat(q)
    _check_unit(q)
    return _quat_derivative(q, np.asarray(omega, dtype=float))


def quat_multiply(p, q):
    """Hamilton product ``p (x) q``."""
    return _quat_multiply(_as_quat(p), _as_quat(q))


def quat_conjugate(q):
    q = _as_quat(q)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q):
    q = _as_quat(q)
    n = np.linalg.norm(q)
    if n <= 1e-12:
        raise ValueError("cannot normalize a near-zero quaternion")
    return q / n


def quat_align_sign(q, q_ref):
    """Return ``q_ref`` or ``-q_ref``, whichever lies in the hemisphere of ``q``.

    A dot product of exactly zero keeps ``+q_ref``.
    """
    q_ref = _as_quat(q_ref)
    if np.dot(_as_quat(q), q_ref) < 0.0:
        return -q_ref
    return q_ref.copy()


def rotation_to_quat(R):
    """Unit quaternion (w >= 0) of a rotation matrix (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    cands = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
    i = int(np.argmax(cands))
    if i == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif i == 1:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s,
                      (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif i == 2:
        s = 2.0 * np.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2])
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s,
                      0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2])
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate(([np.cos(angle / 2)], np.sin(angle / 2) * axis))


def yaw_of(q):
    """Heading angle (z-y-x convention) of a unit quaternion."""
    R = quat_to_rotation(q)
    return float(np.arctan2(R[1, 0], R[0, 0]))
