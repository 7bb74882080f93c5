"""Low-memory discrete-ordinate DG solvers for steady linear transport."""

__version__ = "0.1.0"

from .assembly import BlockSystem, DofReport, ProblemSpec, assemble_blocks, assemble_rhs, count_dofs
from .benchmarks import (
    CASE_IDS,
    BenchmarkCase,
    ErrorReport,
    get_case,
    l1_error,
    manufactured_problem,
    run_convergence_study,
    run_profile,
)
from .diffusion import solve_diffusion_limit
from .krylov import ConvergenceError, KrylovStats, SolverConfig, default_tolerance, gmres, solver_config
from .mesh import BasisSet, CartesianMesh, SpaceKind, build_mesh, piecewise_uniform_1d
from .quadrature import AngularQuadrature, check_moments, gauss_legendre_slab, product_sphere_disk
from .reconstruction import ReconstructionSpec, build_reconstruction
from .schemes import FluxSolution, energy_certificate, solve, solve_lmdg, solve_rlmdg, solve_sndg

__all__ = [
    "AngularQuadrature", "BasisSet", "BenchmarkCase", "BlockSystem", "CASE_IDS", "CartesianMesh",
    "ConvergenceError", "DofReport", "ErrorReport", "FluxSolution", "KrylovStats", "ProblemSpec",
    "ReconstructionSpec", "SolverConfig", "SpaceKind", "assemble_blocks", "assemble_rhs",
    "default_tolerance", "solver_config",
    "build_mesh", "build_reconstruction", "check_moments", "count_dofs", "energy_certificate",
    "gauss_legendre_slab", "get_case", "gmres", "l1_error", "manufactured_problem",
    "piecewise_uniform_1d", "product_sphere_disk", "run_convergence_study", "run_profile",
    "solve", "solve_diffusion_limit", "solve_lmdg", "solve_rlmdg", "solve_sndg",
]
