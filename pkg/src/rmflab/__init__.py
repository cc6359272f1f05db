"""Random multiplicative functions on squarefree integers: simulation, exact moments, square-product counts and bound evaluation."""

from .errors import BudgetExceeded, InternalConsistencyError, InvalidArgument, InvalidSpec, OutOfRange, RMFError, Unsupported
from .model import ModelSpec, partial_sums, sample_path, simulate_partial_sums
from .sieve import SieveTables, build_tables, dickman_rho, smooth_count, squarefree_count

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "InternalConsistencyError",
    "InvalidArgument",
    "InvalidSpec",
    "ModelSpec",
    "OutOfRange",
    "RMFError",
    "SieveTables",
    "Unsupported",
    "build_tables",
    "dickman_rho",
    "partial_sums",
    "sample_path",
    "simulate_partial_sums",
    "smooth_count",
    "squarefree_count",
]
