"""Lumped-force disturbance observers on the momentum system ``z1' = T + f_d``.

``z1 = m v`` is the measured momentum and ``T = m g - R(q) T_c e_z`` the known
input. Both observers propagate a momentum estimate and a disturbance
estimate; they differ only in the correction injected from ``e1 = z1 - z1_hat``.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core_math import _body_z, _check_unit, _signed_power
from .plant import G_VEC, GRAVITY


@dataclass
class FxtdoGains:
    k1: float = 2.0
    k2: float = 2.0
    k1p: float = 0.6
    k2p: float = 0.6
    k1pp: float = 3.0
    k2pp: float = 3.0
    d_inf: float = 1.0 / 3.0
    L1: float = 1.0
    L2: float = 1.0
    # half-width of an optional linear zone replacing the signum term
    boundary_layer: float = 0.0

    def __post_init__(self):
        for name in ("k1", "k2", "k1p", "k2p", "k1pp", "k2pp", "L1", "L2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"gain {name} must be positive")
        if not 0.0 < self.d_inf < 1.0:
            raise ValueError("d_inf must lie strictly inside (0, 1)")
        if self.boundary_layer < 0:
            raise ValueError("boundary_layer must be non-negative")

    def as_array(self):
        return np.array([self.k1, self.k2, self.k1p, self.k2p, self.k1pp, self.k2pp,
                         self.d_inf, self.L1, self.L2, self.boundary_layer])


@dataclass
class HgdoGains:
    alpha1: float = 3.0
    alpha2: float = 2.0
    eps: float = 0.2

    def __post_init__(self):
        if min(self.alpha1, self.alpha2, self.eps) <= 0:
            raise ValueError("HGDO gains must be positive")


@dataclass
class ObserverState:
    z1_hat: np.ndarray = field(default_factory=lambda: np.zeros(3))
    f_hat: np.ndarray = field(default_factory=lambda: np.zeros(3))


@njit(cache=True)
def _phi(e1, c0, c1, c2, d_inf, order, boundary):
    if order == 1:
        low, high = 0.5, 1.0 / (1.0 - d_inf)
    else:
        low, high = 0.0, (1.0 + d_inf) / (1.0 - d_inf)
    n = np.sqrt(e1[0] ** 2 + e1[1] ** 2 + e1[2] ** 2)
    if low == 0.0 and boundary > 0.0 and n < boundary:
        first = e1 / boundary
    else:
        first = _signed_power(e1, low)
    return c0 * first + c1 * e1 + c2 * _signed_power(e1, high)


@njit(cache=True)
def _fxtdo_rhs(z1_hat, f_hat, z1, T, g):
    e1 = z1 - z1_hat
    p1 = _phi(e1, g[0], g[2], g[4], g[6], 1, g[9])
    p2 = _phi(e1, g[1], g[3], g[5], g[6], 2, g[9])
    return f_hat + T + g[7] * p1, g[8] * p2


@njit(cache=True)
def _fxtdo_euler(z1_hat, f_hat, z1, T, g, h):
    dz, df = _fxtdo_rhs(z1_hat, f_hat, z1, T, g)
    return z1_hat + h * dz, f_hat + h * df


@njit(cache=True)
def _hgdo_euler(z1_hat, f_hat, z1, T, a1, a2, eps, h):
    e1 = z1 - z1_hat
    return (z1_hat + h * (f_hat + T + a1 / eps * e1),
            f_hat + h * (a2 / eps**2 * e1))


@njit(cache=True)
def _virtual_input(q, thrust, mass):
    return mass * np.array([0.0, 0.0, GRAVITY]) - thrust * _body_z(q)


def virtual_input(q, thrust, mass):
    """Known input ``m g - R(q) T_c e_z`` of the momentum system (N)."""
    q = np.asarray(q, dtype=float)
    _check_unit(q)
    return mass * G_VEC - thrust * _body_z(q)


def phi1(e1, gains):
    g = gains.as_array()
    return _phi(np.asarray(e1, dtype=float), g[0], g[2], g[4], g[6], 1, g[9])


def phi2(e1, gains):
    g = gains.as_array()
    return _phi(np.asarray(e1, dtype=float), g[1], g[3], g[5], g[6], 2, g[9])


def fxtdo_step(state, z1_meas, T, gains, h, method="euler"):
    """Advance the fixed-time observer by ``h`` with ``z1_meas`` and ``T`` held.

    ``method="rk4"`` integrates the observer ODE with the measurement frozen
    over the step; it exists for discretization studies.
    """
    if not 0 < h <= 0.01:
        raise ValueError("step size must lie in (0, 0.01]")
    g = gains.as_array()
    z1 = np.asarray(z1_meas, dtype=float)
    T = np.asarray(T, dtype=float)
    if method == "euler":
        zh, fh = _fxtdo_euler(state.z1_hat, state.f_hat, z1, T, g, h)
    elif method == "rk4":
        zh, fh = state.z1_hat, state.f_hat
        k1 = _fxtdo_rhs(zh, fh, z1, T, g)
        k2 = _fxtdo_rhs(zh + h / 2 * k1[0], fh + h / 2 * k1[1], z1, T, g)
        k3 = _fxtdo_rhs(zh + h / 2 * k2[0], fh + h / 2 * k2[1], z1, T, g)
        k4 = _fxtdo_rhs(zh + h * k3[0], fh + h * k3[1], z1, T, g)
        zh = zh + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        fh = fh + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    else:
        raise ValueError(f"unknown method {method!r}")
    return ObserverState(zh, fh)


def hgdo_step(state, z1_meas, T, gains, h):
    if not 0 < h <= 0.01:
        raise ValueError("step size must lie in (0, 0.01]")
    zh, fh = _hgdo_euler(state.z1_hat, state.f_hat, np.asarray(z1_meas, dtype=float),
                         np.asarray(T, dtype=float), gains.alpha1, gains.alpha2,
                         gains.eps, h)
    return ObserverState(zh, fh)


@dataclass
class GainReport:
    l2_pass: bool
    l2_margin: float
    l2_gain: float
    rate_bound: float
    l1_status: str = "unverified (no computable bound; tunable)"

    def summary(self):
        verdict = "PASS" if self.l2_pass else "FAIL"
        return (f"L2 condition: {verdict} margin {self.l2_margin:.2f} "
                f"(L2*k2 = {self.l2_gain:.4f}, rate bound = {self.rate_bound:.4f} N/s)\n"
                f"L1 condition: {self.l1_status}")


def check_gain_conditions(gains, rate_bound):
    """Check ``L2 > rate_bound / k2`` for a disturbance-rate bound in N/s."""
    if rate_bound < 0:
        raise ValueError("rate bound must be non-negative")
    l2k2 = gains.L2 * gains.k2
    margin = l2k2 - rate_bound
    return GainReport(bool(margin > 0), float(margin), float(l2k2), float(rate_bound))


class FixedTimeObserver:
    """Fixed-time observer stepped with explicit Euler at the plant rate."""

    name = "fxtdo"

    def __init__(self, gains=None, mass=1.0):
        self.gains = gains or FxtdoGains()
        self.mass = mass
        self._g = self.gains.as_array()
        self.z1_hat = np.zeros(3)
        self.f_hat = np.zeros(3)

    def reset(self, v0, f0=None):
        self.z1_hat = self.mass * np.asarray(v0, dtype=float)
        self.f_hat = np.zeros(3) if f0 is None else np.asarray(f0, dtype=float).copy()

    def step(self, v, q, thrust, h):
        T = _virtual_input(q, thrust, self.mass)
        self.z1_hat, self.f_hat = _fxtdo_euler(self.z1_hat, self.f_hat,
                                               self.mass * v, T, self._g, h)
        return self.f_hat


class HighGainObserver:
    """Linear high-gain observer baseline with corrections alpha/eps, alpha/eps^2."""

    name = "hgdo"

    def __init__(self, gains=None, mass=1.0):
        self.gains = gains or HgdoGains()
        self.mass = mass
        self.z1_hat = np.zeros(3)
        self.f_hat = np.zeros(3)

    def reset(self, v0, f0=None):
        self.z1_hat = self.mass * np.asarray(v0, dtype=float)
        self.f_hat = np.zeros(3) if f0 is None else np.asarray(f0, dtype=float).copy()

    def step(self, v, q, thrust, h):
        T = _virtual_input(q, thrust, self.mass)
        g = self.gains
        self.z1_hat, self.f_hat = _hgdo_euler(self.z1_hat, self.f_hat, self.mass * v,
                                              T, g.alpha1, g.alpha2, g.eps, h)
        return self.f_hat
