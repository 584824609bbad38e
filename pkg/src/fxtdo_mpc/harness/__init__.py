"""Closed-loop simulation, metrics, Monte Carlo batches and the CLI."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .metrics import Metrics, compute_rmse, convergence_time, summarize
from .montecarlo import monte_carlo
from .sim import RunLog, SolverAbort, run_closed_loop

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "Metrics",
           "compute_rmse", "convergence_time", "summarize", "monte_carlo", "RunLog",
           "SolverAbort", "run_closed_loop"]
