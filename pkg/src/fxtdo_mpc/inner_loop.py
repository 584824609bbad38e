"""Incremental nonlinear dynamic inversion (INDI) body-rate controller.

The angular acceleration feedback is the first difference of the measured
rate through a second-order Butterworth low-pass. The previous torque command
passes through an identical filter so the two increments stay synchronized;
with matched filters the torque disturbance enters only through the filter's
high-pass complement, and constant disturbances are rejected exactly.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.signal import butter


@dataclass
class IndiGains:
    k_omega: np.ndarray = field(default_factory=lambda: np.array([400.0, 400.0, 300.0]))
    cutoff_hz: float = 50.0
    torque_limits: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5, 0.5]))
    # proportional term on the raw gyro; the filtered rate is optional
    filter_rate_feedback: bool = False

    def __post_init__(self):
        self.k_omega = np.asarray(self.k_omega, dtype=float)
        self.torque_limits = np.asarray(self.torque_limits, dtype=float)
        if np.any(self.k_omega <= 0):
            raise ValueError("rate gains must be positive")
        if self.cutoff_hz <= 0:
            raise ValueError("cutoff must be positive")


@njit(cache=True)
def _biquad(b, a, s, x):
    # transposed direct form II, vectorized over channels; s has shape (2, n)
    y = b[0] * x + s[0]
    s[0] = b[1] * x - a[1] * y + s[1]
    s[1] = b[2] * x - a[2] * y
    return y


class LowPass:
    """Second-order Butterworth low-pass on a vector signal."""

    def __init__(self, cutoff_hz, h, size=3, initial=None):
        self.b, self.a = butter(2, cutoff_hz, fs=1.0 / h)
        self.size = size
        self.reset(np.zeros(size) if initial is None else initial)

    def reset(self, value):
        # steady-state internal state for a constant input ``value``
        value = np.asarray(value, dtype=float) * np.ones(self.size)
        b, a = self.b, self.a
        self.s = np.empty((2, self.size))
        self.s[1] = (b[2] - a[2]) * value
        self.s[0] = (b[1] - a[1]) * value + self.s[1]
        self.y = value.copy()

    def step(self, x):
        self.y = _biquad(self.b, self.a, self.s, np.asarray(x, dtype=float))
        return self.y


def lowpass_step(filt, sample):
    return filt.step(sample)


@njit(cache=True)
def _indi_torque(tau_f, wdot_f, w_fb, w_c, wdot_r, k, J, lim):
    nu = k * (w_c - w_fb) + wdot_r
    tau = tau_f + J @ (nu - wdot_f)
    return np.minimum(np.maximum(tau, -lim), lim)


class IndiController:
    """Rate controller running at the plant rate ``1/h``.

    ``bypass_filters`` feeds the raw first difference and the raw previous
    torque, which makes the closed loop exactly first order per axis.
    """

    def __init__(self, inertia, gains=None, h=1e-3, bypass_filters=False):
        self.J = np.asarray(inertia, dtype=float)
        self.gains = gains or IndiGains()
        self.h = h
        self.bypass = bypass_filters
        self.rate_filter = LowPass(self.gains.cutoff_hz, h)
        self.accel_filter = LowPass(self.gains.cutoff_hz, h)
        self.torque_filter = LowPass(self.gains.cutoff_hz, h)
        self.reset()

    def reset(self, omega=None, torque=None):
        omega = np.zeros(3) if omega is None else np.asarray(omega, dtype=float)
        torque = np.zeros(3) if torque is None else np.asarray(torque, dtype=float)
        self.omega_prev = omega.copy()
        self.tau_prev = torque.copy()
        self.rate_filter.reset(omega)
        self.accel_filter.reset(np.zeros(3))
        self.torque_filter.reset(torque)
        self.omega_f = omega.copy()
        self.omega_dot_f = np.zeros(3)
        self.tau_f = torque.copy()
        self.samples = 0

    def step(self, omega_meas, omega_cmd, omega_dot_ref=None):
        omega_meas = np.asarray(omega_meas, dtype=float)
        wdot_r = np.zeros(3) if omega_dot_ref is None else omega_dot_ref
        raw_acc = (omega_meas - self.omega_prev) / self.h if self.samples else np.zeros(3)
        if self.bypass:
            self.omega_dot_f = raw_acc
            self.tau_f = self.tau_prev
            self.omega_f = omega_meas
        else:
            self.omega_dot_f = self.accel_filter.step(raw_acc)
            self.tau_f = self.torque_filter.step(self.tau_prev)
            self.omega_f = self.rate_filter.step(omega_meas)
        fb = self.omega_f if self.gains.filter_rate_feedback else omega_meas
        tau = _indi_torque(self.tau_f, self.omega_dot_f, fb, np.asarray(omega_cmd, dtype=float),
                           wdot_r, self.gains.k_omega, self.J, self.gains.torque_limits)
        self.omega_prev = omega_meas.copy()
        self.tau_prev = tau
        self.samples += 1
        return tau


def indi_step(controller, omega_meas, omega_cmd, omega_dot_ref=None):
    return controller.step(omega_meas, omega_cmd, omega_dot_ref)


def indi_torque(tau_f, omega_dot_f, omega_f, omega_cmd, omega_dot_ref, k_omega, inertia):
    """Unsaturated INDI law ``tau_f + J (K (w_c - w_f) + wdot_r - wdot_f)``."""
    nu = np.asarray(k_omega) * (np.asarray(omega_cmd) - omega_f) + omega_dot_ref
    return np.asarray(tau_f) + np.asarray(inertia) @ (nu - np.asarray(omega_dot_f))
