"""Preconditioned all-at-once Runge--Kutta solvers for the heat and Stokes equations."""
from .allatonce import AllAtOncePrecond, AllAtOnceSystem, assemble_allatonce, solve_allatonce
from .config import ExperimentConfig, parse_config
from .drivers import choose_nt, run_allatonce, run_experiment, run_sequential
from .exceptions import (
    CapacityError, ConfigError, ConvergenceError, DimensionError, DomainError, RkaaoError, SingularityError,
)
from .fem2d import assemble_heat, assemble_stokes
from .report import SolveReport, Trajectory, emit_report
from .stage_precond import HeatStageSystem, StokesStageSystem
from .tableaux import ButcherTableau, Family, make_tableau, rk_factorization

__version__ = "0.1.0"

__all__ = [
    "AllAtOncePrecond", "AllAtOnceSystem", "assemble_allatonce", "solve_allatonce",
    "ExperimentConfig", "parse_config",
    "choose_nt", "run_allatonce", "run_experiment", "run_sequential",
    "CapacityError", "ConfigError", "ConvergenceError", "DimensionError", "DomainError", "RkaaoError",
    "SingularityError",
    "assemble_heat", "assemble_stokes",
    "SolveReport", "Trajectory", "emit_report",
    "HeatStageSystem", "StokesStageSystem",
    "ButcherTableau", "Family", "make_tableau", "rk_factorization",
]
