from .amg import AMGSolver
from .chebyshev import ChebyshevSolver, chebyshev_bound, chebyshev_mass_solve, jacobi_spectral_bounds
from .krylov import KrylovConfig, LinearOperator, SolveStats, as_operator, fgmres, gmres
from .multigrid import MultigridSolver, mg_vcycle_solve, symmetric_gauss_seidel

__all__ = [
    "AMGSolver",
    "ChebyshevSolver", "chebyshev_bound", "chebyshev_mass_solve", "jacobi_spectral_bounds",
    "KrylovConfig", "LinearOperator", "SolveStats", "as_operator", "fgmres", "gmres",
    "MultigridSolver", "mg_vcycle_solve", "symmetric_gauss_seidel",
]
