"""Tracking and estimation metrics computed from a :class:`RunLog`."""

from dataclasses import asdict, dataclass

import numpy as np

from .sim import COL, STATUS_FAILED


@dataclass
class Metrics:
    rmse: float
    rmse_axis: np.ndarray
    max_error: float
    convergence_time: float  # nan when unconverged or no activation
    mean_kkt: float
    failed_periods: int
    real_time_factor: float

    @property
    def converged(self):
        return bool(np.isfinite(self.convergence_time))

    def to_dict(self):
        # non-finite values become None so the dict serializes as valid JSON
        def clean(v):
            return float(v) if np.isfinite(v) else None

        d = asdict(self)
        d["rmse_axis"] = [clean(v) for v in self.rmse_axis]
        for key in ("rmse", "max_error", "convergence_time", "mean_kkt", "real_time_factor"):
            d[key] = clean(d[key])
        return d


def position_error(log):
    return log.position - log.reference


def compute_rmse(log, t_start=5.0):
    """Position RMSE (3D and per axis) over ``t >= t_start``.

    The 3D value is the root mean square of ``|p - p_r|``.
    """
    mask = log.t >= t_start - 1e-9
    if not np.any(mask):
        raise ValueError(f"empty RMSE window: no samples after t = {t_start}")
    err = position_error(log)[mask]
    return float(np.sqrt(np.mean(np.sum(err**2, axis=1)))), np.sqrt(np.mean(err**2, axis=0))


def convergence_time(log, band, activation):
    """Time after ``activation`` until ``|f_hat - f_d| < band`` for good.

    Returns the first instant at which the error is below ``band`` and
    stays below ``2 band`` for the rest of the run, measured from
    ``activation``; ``nan`` if no such instant exists.
    """
    t = log.t
    err = np.linalg.norm(log.f_hat - log.f_d, axis=1)
    after = t >= activation - 1e-9
    t, err = t[after], err[after]
    if len(t) == 0:
        return float("nan")
    # latest index that violates the 2 band hold condition
    bad = np.nonzero(err >= 2 * band)[0]
    first_ok = bad[-1] + 1 if len(bad) else 0
    inside = np.nonzero(err[first_ok:] < band)[0]
    if len(inside) == 0:
        return float("nan")
    return float(t[first_ok + inside[0]] - activation)


def summarize(log, t_start=5.0, band=None, activation=None):
    """All metrics of one run; an aborted run that ends before ``t_start``
    gets a ``nan`` RMSE instead of an error."""
    if log.t[-1] >= t_start - 1e-9:
        rmse, axis = compute_rmse(log, t_start)
    else:
        rmse, axis = float("nan"), np.full(3, np.nan)
    err = np.linalg.norm(position_error(log), axis=1)
    conv = float("nan")
    if band is not None and activation is not None:
        conv = convergence_time(log, band, activation)
    status = log.data[:, COL["status"]]
    kkt = log.data[:, COL["kkt"]]
    # one row per control period is enough to count failed periods
    sub = log.meta.get("substeps", 1)
    failed = int(np.count_nonzero(status[::sub] == STATUS_FAILED))
    return Metrics(rmse, axis, float(err.max()), conv, float(np.mean(kkt)), failed,
                   float(log.meta.get("real_time_factor", float("nan"))))
