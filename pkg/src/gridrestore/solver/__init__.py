"""Mixed-integer conic optimization: program IR, continuous backend, search."""

from .program import ConicProgram, VarDef
from .backend import ClarabelBackend, ContinuousSolution, solve_continuous
from .bnb import BnBConfig, MipSolution, solve_michp

__all__ = [
    "ConicProgram",
    "VarDef",
    "ClarabelBackend",
    "ContinuousSolution",
    "solve_continuous",
    "BnBConfig",
    "MipSolution",
    "solve_michp",
]
