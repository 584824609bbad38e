"""Multirate closed-loop simulation.

The outer controller runs every ``substeps`` plant steps and its command
``(T_c, omega_c)`` is held in between. Every plant step evaluates the
disturbance, steps the observer, the INDI rate loop and the rigid-body RK4
integrator, in that order. The 1 kHz part runs in one compiled kernel per
control period; it reproduces step for step what the stand-alone observer,
INDI and plant classes compute.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..baselines import HorizonRef, make_controller
from ..core_math import _body_z
from ..inner_loop import LowPass
from ..observers import _fxtdo_euler, _hgdo_euler
from ..plant import GRAVITY, _rk4_step
from ..reference import EightTrajectory, EightTrajectoryParams, HoverTrajectory, reference_arrays

LOG_VERSION = 1
COLUMNS = (
    ["t"]
    + [f"p_{a}" for a in "xyz"] + [f"v_{a}" for a in "xyz"]
    + [f"q_{a}" for a in "wxyz"] + [f"w_{a}" for a in "xyz"]
    + [f"pr_{a}" for a in "xyz"]
    + ["T_c"] + [f"wc_{a}" for a in "xyz"] + [f"tau_{a}" for a in "xyz"]
    + [f"fd_{a}" for a in "xyz"] + [f"taud_{a}" for a in "xyz"]
    + [f"fhat_{a}" for a in "xyz"]
    + ["status", "kkt"]
)
COL = {name: i for i, name in enumerate(COLUMNS)}
_KIND = {"none": 0, "sinusoid": 1, "constant": 2}
_OBSERVER = {None: 0, "fxtdo": 1, "hgdo": 2}
STATUS_OK, STATUS_INACCURATE, STATUS_FAILED = 0, 1, 2

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class SolverAbort(RuntimeError):
    """Raised when the outer solver fails on too many consecutive periods."""

    def __init__(self, message, log):
        super().__init__(message)
        self.log = log


@dataclass
class RunLog:
    """Per-plant-step record of one closed-loop run (see :data:`COLUMNS`)."""

    data: np.ndarray
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    @property
    def t(self):
        return self.data[:, COL["t"]]

    def column(self, *names):
        return self.data[:, [COL[n] for n in names]]

    @property
    def position(self):
        return self.column("p_x", "p_y", "p_z")

    @property
    def reference(self):
        return self.column("pr_x", "pr_y", "pr_z")

    @property
    def f_d(self):
        return self.column("fd_x", "fd_y", "fd_z")

    @property
    def f_hat(self):
        return self.column("fhat_x", "fhat_y", "fhat_z")

    def to_csv(self, path):
        header = (f"# fxtdo_mpc run log v{LOG_VERSION}; status={self.status}\n"
                  + ",".join(COLUMNS) + "\n")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header)
            np.savetxt(fh, self.data, delimiter=",", fmt="%.12g")


@njit(cache=True)
def _disturbance(kind, start, scale, force, torque, t):
    f = np.zeros(3)
    tau = np.zeros(3)
    dt = t - start
    if kind == 0 or dt < 0:
        return f, tau
    if kind == 1:
        w = 2.0 * np.pi * dt / 15.0
        s, c = np.sin(w), np.cos(w)
        f[0], f[1] = 1.0 + 0.5 * s, -0.5 * c
        tau[0], tau[1] = 0.2 * s, 0.2 * c
    else:
        f[:] = force
        tau[:] = torque
    return scale * f, tau


@njit(cache=True)
def _biquad_step(b, a, s, x):
    y = b[0] * x + s[0]
    s[0] = b[1] * x - a[1] * y + s[1]
    s[1] = b[2] * x - a[2] * y
    return y


@njit(cache=True)
def _inner_block(x, row0, n, h, thrust, omega_c, mass, J, J_inv, tau_lim,
                 d_kind, d_start, d_scale, d_force, d_torque,
                 obs_kind, obs, fx_gains, hg_gains,
                 fb, fa, s_acc, s_tau, s_rate, mem, k_omega, bypass, filt_fb,
                 log):
    """Advance ``n`` plant steps; ``obs`` rows are (z1_hat, f_hat) and ``mem``
    rows are (previous omega, previous torque, sample counter)."""
    g_vec = np.array([0.0, 0.0, GRAVITY])
    for k in range(n):
        t = (row0 + k) * h
        f_d, tau_d = _disturbance(d_kind, d_start, d_scale, d_force, d_torque, t)

        if obs_kind > 0:
            T_in = mass * g_vec - thrust * _body_z(x[6:10])
            z1 = mass * x[3:6]
            if obs_kind == 1:
                zh, fh = _fxtdo_euler(obs[0], obs[1], z1, T_in, fx_gains, h)
            else:
                zh, fh = _hgdo_euler(obs[0], obs[1], z1, T_in,
                                     hg_gains[0], hg_gains[1], hg_gains[2], h)
            obs[0, :] = zh
            obs[1, :] = fh

        w = x[10:13]
        if mem[2, 0] > 0:
            raw_acc = (w - mem[0]) / h
        else:
            raw_acc = np.zeros(3)
        if bypass:
            wdot_f = raw_acc
            tau_f = mem[1].copy()
            w_f = w.copy()
        else:
            wdot_f = _biquad_step(fb, fa, s_acc, raw_acc)
            tau_f = _biquad_step(fb, fa, s_tau, mem[1].copy())
            w_f = _biquad_step(fb, fa, s_rate, w.copy())
        w_fb = w_f if filt_fb else w
        nu = k_omega * (omega_c - w_fb)
        tau = tau_f + J @ (nu - wdot_f)
        tau = np.minimum(np.maximum(tau, -tau_lim), tau_lim)
        mem[0, :] = w
        mem[1, :] = tau
        mem[2, 0] += 1.0

        r = log[row0 + k]
        r[0] = t
        r[1:14] = x
        r[17] = thrust
        r[18:21] = omega_c
        r[21:24] = tau
        r[24:27] = f_d
        r[27:30] = tau_d
        r[30:33] = obs[1]

        x = _rk4_step(x, thrust, tau, f_d, tau_d, mass, J, J_inv, h)
    return x


def make_trajectory(cfg):
    tr = cfg["trajectory"]
    if cfg.scenario == "eight":
        return EightTrajectory(EightTrajectoryParams(tr["r_x"], tr["r_y"], tr["r_z"], tr["k_t"]))
    return HoverTrajectory(tr["hover_position"])


@dataclass
class ReferenceTable:
    """Reference sampled on the control grid, long enough for the last horizon."""

    X: np.ndarray
    U: np.ndarray
    acc: np.ndarray
    yaw: np.ndarray
    stride: int
    horizon: int

    def window(self, i):
        sl = slice(i, i + self.stride * self.horizon + 1, self.stride)
        return HorizonRef(self.X[sl], self.U[sl], self.acc[sl], self.yaw[sl])


def build_reference_table(traj, n_ctrl, control_dt, horizon, stride, mass):
    times = control_dt * np.arange(n_ctrl + stride * horizon + 1)
    X, U = reference_arrays(traj, times, mass)
    f = traj(times)
    return ReferenceTable(X, U, np.atleast_2d(f.a), np.atleast_1d(f.psi), stride, horizon)


def initial_state(traj):
    f = traj(np.array([0.0]))
    x = np.zeros(13)
    x[0:3] = f.p[0]
    x[3:6] = f.v[0]
    x[6] = 1.0
    return x


_STATUS_CODE = {"optimal": STATUS_OK, "ok": STATUS_OK, "max_iter": STATUS_INACCURATE}


def run_closed_loop(cfg, controller=None, raise_on_abort=True):
    """Simulate ``cfg`` and return a :class:`RunLog`.

    The run is deterministic: the only randomness is the optional
    measurement noise, drawn from ``experiment.seed``. If the outer solver
    fails on more than ``experiment.max_failures`` consecutive periods the
    run stops; with ``raise_on_abort`` a :class:`SolverAbort` carrying the
    partial log is raised, otherwise the partial log is returned with
    status ``"aborted"``.
    """
    params = cfg.quad_params()
    mpc_cfg = cfg.mpc_config()
    h = cfg.plant_dt
    sub = cfg.substeps
    control_dt = sub * h
    n_steps = int(round(cfg.duration / h))
    n_ctrl = -(-n_steps // sub)
    stride = int(round(mpc_cfg.dt / control_dt))
    exp = cfg["experiment"]

    traj = make_trajectory(cfg)
    table = build_reference_table(traj, n_ctrl, control_dt, mpc_cfg.horizon, stride,
                                  params.mass)
    if controller is None:
        controller = make_controller(cfg.controller, params.mass, cfg.mpc_weights(), mpc_cfg,
                                     cfg.pid_gains(), cfg["rtmpc"]["init_penalty"],
                                     control_dt)
    dist = cfg.disturbance()
    indi = cfg.indi_gains()
    filt = LowPass(indi.cutoff_hz, h)
    noise = cfg["noise"]
    rng = np.random.default_rng(exp["seed"])

    x = initial_state(traj)
    obs = np.zeros((2, 3))
    obs[0] = params.mass * x[3:6]
    mem = np.zeros((3, 3))
    s_acc, s_tau, s_rate = (np.zeros((2, 3)) for _ in range(3))
    log = np.zeros((n_steps + 1, len(COLUMNS)))
    obs_kind = _OBSERVER[controller.observer]
    fx = cfg.fxtdo_gains().as_array()
    hg = np.array([cfg.hgdo_gains().alpha1, cfg.hgdo_gains().alpha2, cfg.hgdo_gains().eps])
    kind = _KIND[dist.kind]
    force = np.array(dist.force, dtype=float)
    torque = np.array(dist.torque, dtype=float)
    J, J_inv = params.inertia, params.inertia_inv
    tau_lim = indi.torque_limits

    status = "ok"
    failures = 0
    wall = time.perf_counter()
    for c in range(n_ctrl):
        row0 = c * sub
        n = min(sub, n_steps - row0)
        x_meas = x.copy()
        if noise["position_std"] > 0:
            x_meas[0:3] += rng.normal(0.0, noise["position_std"], 3)
        if noise["velocity_std"] > 0:
            x_meas[3:6] += rng.normal(0.0, noise["velocity_std"], 3)
        cmd = controller.update(x_meas, obs[1].copy(), table.window(c))
        code = STATUS_FAILED if cmd.status.startswith("failed") else \
            _STATUS_CODE.get(cmd.status, STATUS_INACCURATE)
        failures = failures + 1 if code == STATUS_FAILED else 0
        omega_c = np.asarray(cmd.omega, dtype=float)
        x = _inner_block(x, row0, n, h, float(cmd.thrust), omega_c, params.mass, J, J_inv,
                         tau_lim, kind, dist.start, dist.scale, force, torque,
                         obs_kind, obs, fx, hg, filt.b, filt.a, s_acc, s_tau, s_rate, mem,
                         indi.k_omega, False, indi.filter_rate_feedback, log)
        log[row0:row0 + n, COL["status"]] = code
        log[row0:row0 + n, COL["kkt"]] = cmd.kkt
        if failures > exp["max_failures"]:
            status = "aborted"
            log = log[:row0 + n + 1]
            n_steps = row0 + n
            break

    # final row: state at the end time, commands held
    last = log[n_steps]
    last[:] = log[n_steps - 1] if n_steps > 0 else 0.0
    t_end = n_steps * h
    last[0] = t_end
    last[1:14] = x
    f_end, tau_end = dist(t_end)
    last[24:27] = f_end
    last[27:30] = tau_end
    last[30:33] = obs[1]
    log[:, 14:17] = traj(log[:, 0]).p

    wall = time.perf_counter() - wall
    meta = {"controller": cfg.controller, "scenario": cfg.scenario,
            "duration": n_steps * h, "activation": cfg.activation, "substeps": sub,
            "wall_time": wall, "real_time_factor": n_steps * h / wall if wall > 0 else np.inf}
    run = RunLog(log, status, meta)
    if status == "aborted" and raise_on_abort:
        raise SolverAbort(f"outer solver failed on {failures} consecutive periods", run)
    return run
