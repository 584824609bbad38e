"""Command-line entry point: ``python -m fxtdo_mpc <command> [options]``.

Commands
--------
run          simulate one scenario and write ``run.csv`` and ``summary.json``
montecarlo   randomized disturbance-scale batch, writes ``montecarlo.csv``
compare      run all five controllers on one scenario and print an RMSE table
check-gains  report the observer gain conditions for the configured disturbance

Exit codes: 0 success, 2 configuration error, 3 solver abort.
"""

import argparse
import json
import os
import sys

import numpy as np
import yaml

from ..baselines import CONTROLLERS
from ..disturbance import derivative_bound, force_bound
from ..observers import check_gain_conditions
from .config import ConfigError, ExperimentConfig, load_config
from .metrics import summarize
from .montecarlo import monte_carlo, write_results
from .sim import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, SolverAbort, run_closed_loop


def _parser():
    p = argparse.ArgumentParser(prog="fxtdo_mpc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "montecarlo", "compare", "check-gains"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML config file (defaults are built in)")
        s.add_argument("--scenario", choices=("eight", "hover"))
        s.add_argument("--controller", choices=CONTROLLERS)
        s.add_argument("--duration", type=float)
        s.add_argument("--seed", type=int)
        s.add_argument("--out", default="out", help="output directory")
        s.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override any config key (value parsed as YAML)")
        if name == "montecarlo":
            s.add_argument("--runs", type=int)
            s.add_argument("--workers", type=int)
            s.add_argument("--controllers", default=",".join(CONTROLLERS),
                           help="comma-separated controller ids")
    return p


def _build_config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig.default()
    overrides = {}
    for flag, key in (("scenario", "experiment.scenario"), ("controller", "experiment.controller"),
                      ("duration", "experiment.duration"), ("seed", "experiment.seed")):
        if getattr(args, flag) is not None:
            overrides[key] = getattr(args, flag)
    if getattr(args, "runs", None) is not None:
        overrides["montecarlo.runs"] = args.runs
    if getattr(args, "workers", None) is not None:
        overrides["montecarlo.workers"] = args.workers
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        overrides[key.strip()] = yaml.safe_load(value)
    return cfg.with_overrides(overrides) if overrides else cfg


def _summary(cfg, log):
    band = 0.05 * force_bound(cfg.disturbance())
    m = summarize(log, cfg["experiment"]["rmse_start"], band if band > 0 else None,
                  cfg.activation)
    return {"controller": cfg.controller, "scenario": cfg.scenario, "status": log.status,
            "duration": log.meta["duration"], "activation": cfg.activation,
            "convergence_band": band, **m.to_dict()}


def _fmt(value):
    return "nan" if value is None else f"{value:.4f}"


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_run(cfg, args):
    out = args.out
    try:
        log = run_closed_loop(cfg)
        code = EXIT_OK
    except SolverAbort as exc:
        log = exc.log
        code = EXIT_SOLVER
        print(f"error: {exc}", file=sys.stderr)
    log.to_csv(os.path.join(out, "run.csv"))
    summary = _summary(cfg, log)
    _write_json(os.path.join(out, "summary.json"), summary)
    print(f"{cfg.controller} on {cfg.scenario}: RMSE {_fmt(summary['rmse'])} m, "
          f"max error {_fmt(summary['max_error'])} m, status {log.status}")
    return code


def cmd_compare(cfg, args):
    out = args.out
    rows = []
    code = EXIT_OK
    for name in CONTROLLERS:
        run_cfg = cfg.with_overrides({"experiment.controller": name})
        try:
            log = run_closed_loop(run_cfg)
        except SolverAbort as exc:
            log = exc.log
            code = EXIT_SOLVER
        rows.append(_summary(run_cfg, log))
    print(f"{'controller':<12}{'RMSE [m]':>10}{'max [m]':>10}  status")
    for r in rows:
        print(f"{r['controller']:<12}{_fmt(r['rmse']):>10}{_fmt(r['max_error']):>10}"
              f"  {r['status']}")
    _write_json(os.path.join(out, "compare.json"), rows)
    return code


def cmd_montecarlo(cfg, args):
    out = args.out
    mc = cfg["montecarlo"]
    exp = cfg["experiment"]
    controllers = args.controllers.split(",")
    results, summary = monte_carlo(cfg, controllers, mc["runs"], exp["seed"],
                                   mc["duration"], mc["workers"])
    write_results(results, os.path.join(out, "montecarlo.csv"))
    _write_json(os.path.join(out, "montecarlo_summary.json"), summary)
    print(f"{'controller':<12}{'median':>10}{'IQR':>10}{'mean':>10}{'failed':>8}")
    for c, s in summary.items():
        print(f"{c:<12}{s.get('median', np.nan):>10.4f}{s.get('iqr', np.nan):>10.4f}"
              f"{s.get('mean', np.nan):>10.4f}{s['failed']:>8d}")
    return EXIT_OK


def cmd_check_gains(cfg, args):
    dist = cfg.disturbance()
    report = check_gain_conditions(cfg.fxtdo_gains(), derivative_bound(dist))
    print(report.summary())
    return EXIT_OK if report.l2_pass else 1


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = _build_config(args)
        if args.command == "montecarlo":
            unknown = set(args.controllers.split(",")) - set(CONTROLLERS)
            if unknown:
                raise ConfigError(f"unknown controllers: {', '.join(sorted(unknown))}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    handler = {"run": cmd_run, "montecarlo": cmd_montecarlo, "compare": cmd_compare,
               "check-gains": cmd_check_gains}[args.command]
    return handler(cfg, args)


if __name__ == "__main__":
    sys.exit(main())
