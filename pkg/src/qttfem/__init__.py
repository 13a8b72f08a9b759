"""Low-rank QTT finite elements for multiscale diffusion problems."""
from .tt_core import TtOperator, TtTensor, tt_from_full, tt_round
from .qtt_grid import FeFunction, GridSpec
from .fem_assembly import MultiscaleCoefficient, assemble_multiscale, precondition
from .tt_solver import SolverOptions, als_solve, solve_flux_1d

__version__ = "0.1.0"

__all__ = [
    "TtTensor", "TtOperator", "tt_from_full", "tt_round",
    "GridSpec", "FeFunction",
    "MultiscaleCoefficient", "assemble_multiscale", "precondition",
    "SolverOptions", "als_solve", "solve_flux_1d",
]
