"""Monte Carlo batches over the disturbance scale ``k ~ U[0, 1]``.

All controllers see the same sequence of scale factors, so the batch is
paired. Each run gets its own seed spawned from the batch seed; results are
merged by run index, so worker count does not change the output.
"""

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .metrics import compute_rmse
from .sim import SolverAbort, run_closed_loop


@dataclass
class RunResult:
    index: int
    controller: str
    k: float
    seed: int
    rmse: float
    status: str


def draw_scales(n, seed):
    """Scale factors and per-run seeds for a batch of ``n`` runs."""
    if n < 1:
        raise ValueError("a batch needs at least one run")
    ss = np.random.SeedSequence(seed)
    k = np.random.default_rng(ss).uniform(0.0, 1.0, n)
    seeds = [int(child.generate_state(1)[0]) for child in ss.spawn(n)]
    return k, seeds


def _one_run(args):
    cfg, index, controller, k, seed, duration = args
    run_cfg = cfg.with_overrides({
        "experiment.controller": controller,
        "experiment.seed": seed,
        "experiment.duration": duration,
        "disturbance.scale": float(k),
    })
    try:
        log = run_closed_loop(run_cfg, raise_on_abort=False)
        status = log.status
        rmse = compute_rmse(log, run_cfg["experiment"]["rmse_start"])[0]
    except (SolverAbort, ValueError, FloatingPointError) as exc:
        status, rmse = f"error: {exc}", float("nan")
    return RunResult(index, controller, float(k), seed, float(rmse), status)


def monte_carlo(cfg, controllers, n, seed=0, duration=None, workers=1, k_values=None):
    """Run ``n`` randomized runs per controller; return results and a summary.

    ``k_values`` replaces the random draw (e.g. to force ``k = 0``).
    """
    k, seeds = draw_scales(n, seed)
    if k_values is not None:
        k = np.broadcast_to(np.asarray(k_values, dtype=float), (n,))
    duration = cfg["montecarlo"]["duration"] if duration is None else duration
    jobs = [(cfg, i, c, k[i], seeds[i], duration)
            for c in controllers for i in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]
    results.sort(key=lambda r: (controllers.index(r.controller), r.index))
    return results, summarize_batch(results, controllers)


def summarize_batch(results, controllers):
    summary = {}
    for c in controllers:
        vals = np.array([r.rmse for r in results if r.controller == c])
        ok = vals[np.isfinite(vals)]
        entry = {"runs": int(len(vals)), "failed": int(len(vals) - len(ok))}
        if len(ok):
            p25, median, p75 = np.percentile(ok, [25, 50, 75])
            entry.update(mean=float(ok.mean()), median=float(median), p25=float(p25),
                         p75=float(p75), iqr=float(p75 - p25), p5=float(np.percentile(ok, 5)),
                         p95=float(np.percentile(ok, 95)), max=float(ok.max()))
        summary[c] = entry
    return summary


def write_results(results, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "controller", "k", "seed", "rmse", "status"])
        for r in results:
            w.writerow([r.index, r.controller, f"{r.k:.12g}", r.seed, f"{r.rmse:.12g}", r.status])
