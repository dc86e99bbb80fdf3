"""Nearest-matrix solvers under psd, nonnegativity, and linear constraints."""

from .baselines import (
    SOLVERS,
    solve_abcgd,
    solve_bcd,
    solve_erabcd,
    solve_erabcd2,
    solve_mbcd,
)
from .engine import SolveOptions, SolveResult, solve_imabcd
from .estimator import ConstrainedNearnessProjector
from .linalg import eig_sym, project_nonneg, project_psd
from .metrics import KktResidual, kkt_residual, performance_profile
from .model import (
    BestApproxInstance,
    BiqData,
    DualPoint,
    build_ex_biq,
    load_biq,
    load_instance,
    make_custom_instance,
    make_random_biq,
    primal_from_dual,
    save_instance,
)

__all__ = [
    "SOLVERS",
    "SolveOptions",
    "SolveResult",
    "BestApproxInstance",
    "BiqData",
    "DualPoint",
    "KktResidual",
    "ConstrainedNearnessProjector",
    "build_ex_biq",
    "eig_sym",
    "kkt_residual",
    "load_biq",
    "load_instance",
    "make_custom_instance",
    "make_random_biq",
    "performance_profile",
    "primal_from_dual",
    "project_nonneg",
    "project_psd",
    "save_instance",
    "solve_abcgd",
    "solve_bcd",
    "solve_erabcd",
    "solve_erabcd2",
    "solve_imabcd",
    "solve_mbcd",
]

__version__ = "0.1.0"
