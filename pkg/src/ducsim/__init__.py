"""Asynchronous decentralized unit commitment with a discrete-event runtime."""

from .case_io import RunConfig, gen_synthetic, load_case, load_config, load_partition, save_case, save_partition
from .case_model import Generator, Partition, PowerCase, TransmissionLine, classify_region, validate_case
from .mip import solve_centralized, solve_miqp
from .qp import QPProblem, solve_qp
from .runtime import RunResult, compute_metrics, merge_solution, run, run_async, run_central, run_sync

__version__ = "0.1.0"

__all__ = [
    "Generator",
    "Partition",
    "PowerCase",
    "QPProblem",
    "RunConfig",
    "RunResult",
    "TransmissionLine",
    "classify_region",
    "compute_metrics",
    "gen_synthetic",
    "load_case",
    "load_config",
    "load_partition",
    "merge_solution",
    "run",
    "run_async",
    "run_central",
    "run_sync",
    "save_case",
    "save_partition",
    "solve_centralized",
    "solve_miqp",
    "solve_qp",
    "validate_case",
]
