"""Bernoulli-barycentric rational matrix collocation for 2D evolution equations.

Time is expanded in Bernoulli polynomials, space is collocated with
Floater-Hormann barycentric rational interpolants, and the resulting block
systems are solved by GMRES with dimension-expanded block preconditioners.
"""
from .assembly import (
    CollocationSystem,
    DiscreteOperator,
    apply_H,
    bm_ode_solve,
    build_operator,
    build_rhs,
    build_system,
    error_report,
    reconstruct,
    solve_direct,
)
from .barycentric import RationalGrid, make_grid
from .bernoulli import BernoulliBasis, CapabilityError, build_basis
from .krylov import GmresReport, LuFactor, SingularMatrixError, gmres, lu_factor, lu_solve
from .precond import (
    AugmentedSystem,
    DePreconditioner,
    apply_inverse,
    augment,
    build_preconditioner,
    preconditioned_spectrum,
)
from .problem import Case, OdeProblem, PdeProblem, builtin_problem, load_problem

__version__ = "0.1.0"
