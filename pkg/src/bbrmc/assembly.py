"""Space-time collocation systems ``H U = R`` and their evaluation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Optional

import numpy as np

from .barycentric import DEFAULT_DTILDE, RationalGrid, make_grid
from .bernoulli import BernoulliBasis, build_basis, eval_row, gauss_legendre_01, project_coefficients
from .krylov import SingularMatrixError, lu_factor, lu_solve
from .problem import Case, PdeProblem

__all__ = [
    "DiscreteOperator",
    "CollocationSystem",
    "build_operator",
    "build_rhs",
    "build_system",
    "apply_H",
    "dense_H",
    "sparse_H",
    "solve_direct",
    "bm_ode_solve",
    "reconstruct",
    "nodal_solution",
    "error_report",
    "convergence_orders",
    "exact_coefficients",
    "t1_condition",
]

COMPAT_TOL = 1e-8
ERROR_T_SAMPLES = 101
DENSE_BUDGET_BYTES = 1 << 30


@dataclass(frozen=True)
class DiscreteOperator:
    """Interior collocation matrix ``Q`` of the spatial operator and its boundary lift.

    Unknowns are ordered x-major: interior node ``(i, j)`` sits at
    ``(i-1) * My + (j-1)``. Boundary nodes run bottom, top, left, right.
    """

    gx: RationalGrid = field(repr=False)
    gy: RationalGrid = field(repr=False)
    Mx: int
    My: int
    Q: np.ndarray = field(repr=False)
    Q_bnd: np.ndarray = field(repr=False)
    interior_x: np.ndarray = field(repr=False)
    interior_y: np.ndarray = field(repr=False)
    boundary_x: np.ndarray = field(repr=False)
    boundary_y: np.ndarray = field(repr=False)
    boundary_index: np.ndarray = field(repr=False)  # flat full-grid index of each boundary node

    @property
    def khat(self) -> int:
        return self.Mx * self.My


def boundary_nodes(Mt: int, Mb: int) -> list:
    """Full-grid ``(i, j)`` of boundary nodes: bottom, top, left, right."""
    out = [(i, 0) for i in range(Mt + 1)]
    out += [(i, Mb) for i in range(Mt + 1)]
    out += [(0, j) for j in range(1, Mb)]
    out += [(Mt, j) for j in range(1, Mb)]
    return out


def build_operator(problem: PdeProblem, Mx_sub: int, My_sub: int, d: int = DEFAULT_DTILDE) -> DiscreteOperator:
    if Mx_sub < 2 or My_sub < 2:
        raise ValueError("need at least two subintervals in each direction")
    a, b, c, dd = problem.domain
    gx = make_grid(a, b, Mx_sub, min(d, Mx_sub))
    gy = make_grid(c, dd, My_sub, min(d, My_sub))
    Mx, My = Mx_sub - 1, My_sub - 1
    xi, yi = gx.nodes[1:-1], gy.nodes[1:-1]
    X = np.repeat(xi, My)
    Y = np.tile(yi, Mx)

    # rows restricted to interior nodes, columns over the full grid
    Dx1, Dx2 = gx.D1_full[1:-1], gx.D2_full[1:-1]
    Dy1, Dy2 = gy.D1_full[1:-1], gy.D2_full[1:-1]
    Ix = np.eye(Mx_sub + 1)[1:-1]
    Iy = np.eye(My_sub + 1)[1:-1]
    terms = [
        (Dx2, Iy), (Dx1, Dy1), (Ix, Dy2), (Dx1, Iy), (Ix, Dy1), (Ix, Iy),
    ]
    full = np.zeros((Mx * My, (Mx_sub + 1) * (My_sub + 1)))
    for i, (A, B) in enumerate(terms, start=1):
        coef = problem.coefficient(i, X, Y)
        if coef is None:
            continue
        full += coef[:, None] * np.kron(A, B)

    interior_index = (np.arange(1, Mx_sub)[:, None] * (My_sub + 1) + np.arange(1, My_sub)[None, :]).ravel()
    bnodes = boundary_nodes(Mx_sub, My_sub)
    bidx = np.array([i * (My_sub + 1) + j for i, j in bnodes])
    Q = np.ascontiguousarray(full[:, interior_index])
    Q_bnd = np.ascontiguousarray(full[:, bidx])
    bx = gx.nodes[[i for i, _ in bnodes]]
    by = gy.nodes[[j for _, j in bnodes]]
    for arr in (Q, Q_bnd, X, Y, bx, by, bidx):
        arr.setflags(write=False)
    return DiscreteOperator(gx, gy, Mx, My, Q, Q_bnd, X, Y, bx, by, bidx)


# ---------------------------------------------------------------------------
# right-hand sides


def integrated_source_coeffs(
    source: Callable, N: int, double: bool, c0, c1=0.0, quadrature_order: int = 32
) -> np.ndarray:
    """Bernoulli coefficients of the once- or twice-integrated source.

    ``source(k, t)`` returns the k-th time derivative (array valued is fine).
    Single: ``F(t) = int_0^t f + c0``. Double:
    ``F(t) = int_0^t (t - s) f(s) ds + c1 t + c0``.
    """
    ts, ws = gauss_legendre_01(quadrature_order)
    vals = [np.asarray(source(0, t), dtype=float) for t in ts]
    int_f = sum(w * v for w, v in zip(ws, vals))
    int_1 = sum(w * (1 - t) * v for t, w, v in zip(ts, ws, vals))
    out = []
    if not double:
        out = [int_1 + c0, int_f]
        shift = 2
    else:
        int_2 = sum(w * 0.5 * (1 - t) ** 2 * v for t, w, v in zip(ts, ws, vals))
        out = [int_2 + 0.5 * c1 + c0, int_1 + c1, 0.5 * int_f]
        shift = 3
    out = [np.broadcast_to(o, np.shape(int_f)).astype(float) for o in out]
    for n in range(len(out), N + 1):
        k = n - shift
        diff = np.asarray(source(k, 1.0), dtype=float) - np.asarray(source(k, 0.0), dtype=float)
        out.append(diff / factorial(n))
    return np.array(out[: N + 1])


def _effective_betas(problem: PdeProblem):
    """Scaled ``(beta1, beta2, scale)``: CASE1 divides by beta2, CASE2 by beta1."""
    case = problem.case
    if case is Case.CASE1:
        return 0.0, 1.0, problem.beta2
    if case is Case.CASE2:
        return 1.0, 0.0, problem.beta1
    return problem.beta1, problem.beta2, 1.0


def build_rhs(problem: PdeProblem, basis: BernoulliBasis, op: DiscreteOperator):
    """Right-hand side ``R`` (shape ``(N+1, khat)``) and boundary coefficients ``G``."""
    N = basis.N
    case = problem.case
    orders = problem.required_orders(N)
    problem.source.require(orders["source"], "source term")
    problem.boundary.require(orders["boundary"], "boundary data")
    b1, b2, scale = _effective_betas(problem)
    X, Y = op.interior_x, op.interior_y
    a0 = problem.alpha0(X, Y)

    def src(k, t):
        return problem.source.derivative(k, t, X, Y) / scale

    if case is Case.CASE1:
        F = integrated_source_coeffs(src, N, double=False, c0=a0)
        Pt = basis.P
    else:
        a1 = problem.alpha1(X, Y)
        F = integrated_source_coeffs(src, N, double=True, c0=b1 * a0, c1=b2 * a0 + b1 * a1)
        Pt = basis.P @ basis.P

    bx, by = op.boundary_x, op.boundary_y
    mismatch = np.max(np.abs(problem.boundary(0.0, bx, by) - problem.alpha0(bx, by)), initial=0.0)
    if mismatch > COMPAT_TOL:
        warnings.warn(
            f"boundary data and initial data disagree by {mismatch:.3e} at t=0", RuntimeWarning, stacklevel=2
        )
    G = project_coefficients(lambda k, t: problem.boundary.derivative(k, t, bx, by), N)
    R = F - Pt @ G @ (op.Q_bnd.T / scale)
    return R, G


# ---------------------------------------------------------------------------
# global system


@dataclass(frozen=True)
class CollocationSystem:
    """Block system ``H U = R`` with ``U`` stored as ``(N+1, khat)`` row blocks.

    ``Q`` here is already scaled (divided by beta2 in CASE1, by beta1 in
    CASE2), and ``beta1``/``beta2`` are the scaled values.
    """

    case: Case
    basis: BernoulliBasis = field(repr=False)
    op: DiscreteOperator = field(repr=False)
    Q: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    bnd_coeffs: np.ndarray = field(repr=False)
    beta1: float
    beta2: float
    problem: Optional[PdeProblem] = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.basis.N

    @property
    def P(self) -> np.ndarray:
        return self.basis.P

    @property
    def P2(self) -> np.ndarray:
        return self.basis.P @ self.basis.P

    @property
    def khat(self) -> int:
        return self.op.khat

    @property
    def size(self) -> int:
        return (self.N + 1) * self.khat

    def time_coefficients(self):
        """``(C_I, C_Q)`` with ``H = kron(C_I, I) + kron(C_Q, Q)``."""
        n = self.N + 1
        if self.case is Case.CASE1:
            return np.eye(n), np.array(self.P)
        if self.case is Case.CASE2:
            return np.eye(n), self.P2
        return self.beta1 * np.eye(n) + self.beta2 * self.P, self.P2


def build_system(problem: PdeProblem, N: int, Mx_sub: int, My_sub: Optional[int] = None,
                 d: int = DEFAULT_DTILDE) -> CollocationSystem:
    basis = build_basis(N)
    op = build_operator(problem, Mx_sub, My_sub or Mx_sub, d)
    R, G = build_rhs(problem, basis, op)
    b1, b2, scale = _effective_betas(problem)
    Q = op.Q / scale
    Q.setflags(write=False)
    R.setflags(write=False)
    return CollocationSystem(problem.case, basis, op, Q, R, G, b1, b2, problem)


def apply_H(system: CollocationSystem, v: np.ndarray) -> np.ndarray:
    """Matrix-free ``H v`` using only ``P`` and ``Q`` products."""
    v = np.asarray(v)
    if v.shape[0] != system.size:
        raise ValueError(f"vector length {v.shape[0]} does not match system size {system.size}")
    V = v.reshape(system.N + 1, system.khat)
    CI, CQ = system.time_coefficients()
    W = CI @ V + CQ @ (V @ system.Q.T)
    return W.reshape(-1)


def dense_H(system: CollocationSystem) -> np.ndarray:
    CI, CQ = system.time_coefficients()
    return np.kron(CI, np.eye(system.khat)) + np.kron(CQ, system.Q)


def sparse_H(system: CollocationSystem):
    import scipy.sparse as sp

    CI, CQ = system.time_coefficients()
    I = sp.identity(system.khat, format="csr")
    return (sp.kron(sp.csr_matrix(CI), I) + sp.kron(sp.csr_matrix(CQ), sp.csr_matrix(system.Q))).tocsc()


def solve_direct(system: CollocationSystem, dense_budget: int = DENSE_BUDGET_BYTES) -> np.ndarray:
    """Unstructured direct solve of ``H U = R``; returns ``U`` as ``(N+1, khat)``.

    ``H`` is factored densely when it fits in ``dense_budget`` bytes and by
    sparse LU (minimum degree on ``H^T H``) otherwise.
    """
    b = np.asarray(system.R).reshape(-1)
    if system.size**2 * 8 <= dense_budget:
        x = lu_solve(lu_factor(dense_H(system), name="H"), b)
    else:
        import scipy.sparse.linalg as spl

        try:
            x = spl.splu(sparse_H(system), permc_spec="MMD_ATA").solve(b)
        except RuntimeError as exc:
            raise SingularMatrixError("H", -1, 0.0) from exc
    return x.reshape(system.N + 1, system.khat)


def exact_coefficients(system: CollocationSystem, field_derivative: Optional[Callable] = None) -> np.ndarray:
    """Bernoulli coefficients of a reference solution at the interior nodes.

    ``field_derivative(k, t, x, y)`` gives time derivatives of the reference;
    by default the boundary field is used, which for the builtins is the
    exact solution on the whole domain.
    """
    deriv = field_derivative or system.problem.boundary.derivative
    X, Y = system.op.interior_x, system.op.interior_y
    return project_coefficients(lambda k, t: deriv(k, t, X, Y), system.N)


# ---------------------------------------------------------------------------
# scalar ODE path


def bm_ode_solve(beta1: float, beta2: float, kappa: float, f_oracle: Callable,
                 alpha0: float, alpha1: float, N: int):
    """Solve ``beta1 u'' + beta2 u' + kappa u = f`` on [0, 1].

    Returns ``(U, u)`` with ``u(t) = B(t) . U``. With ``beta1 = 0`` the
    equation is integrated once (after dividing by ``beta2``); otherwise twice.
    """
    basis = build_basis(N)
    P = basis.P
    I = np.eye(N + 1)
    if beta1 == 0:
        if beta2 == 0:
            raise ValueError("beta1 and beta2 cannot both vanish")
        A = I + (kappa / beta2) * P
        F = integrated_source_coeffs(lambda k, t: f_oracle(k, t) / beta2, N, double=False, c0=alpha0)
    else:
        A = beta1 * I + beta2 * P + kappa * (P @ P)
        F = integrated_source_coeffs(
            f_oracle, N, double=True, c0=beta1 * alpha0, c1=beta2 * alpha0 + beta1 * alpha1
        )
    U = lu_solve(lu_factor(A, name="ODE system"), F)

    def u(t):
        return eval_row(basis, t) @ U

    return U, u


# ---------------------------------------------------------------------------
# evaluation


def nodal_solution(system: CollocationSystem, U: np.ndarray, t: float) -> np.ndarray:
    """Values on the full ``(Mx_sub+1, My_sub+1)`` node grid at time ``t``."""
    op = system.op
    nx, ny = op.gx.M + 1, op.gy.M + 1
    full = np.empty(nx * ny)
    inner = (eval_row(system.basis, t) @ np.asarray(U).reshape(system.N + 1, -1))
    idx = (np.arange(1, nx - 1)[:, None] * ny + np.arange(1, ny - 1)[None, :]).ravel()
    full[idx] = inner
    full[op.boundary_index] = system.problem.boundary(t, op.boundary_x, op.boundary_y)
    return full.reshape(nx, ny)


def _bary_row(grid: RationalGrid, x: float) -> np.ndarray:
    d = x - grid.nodes
    hit = np.abs(d) < 1e-14 * (grid.b - grid.a)
    if hit.any():
        row = np.zeros_like(d)
        row[np.argmax(hit)] = 1.0
        return row
    k = grid.weights / d
    return k / k.sum()


def reconstruct(system: CollocationSystem, U: np.ndarray, t: float, x: float, y: float) -> float:
    """Approximate ``u(t, x, y)``: Bernoulli series in t, rational interpolation in space."""
    op = system.op
    if not (op.gx.a - 1e-12 <= x <= op.gx.b + 1e-12 and op.gy.a - 1e-12 <= y <= op.gy.b + 1e-12):
        raise ValueError(f"point ({x}, {y}) lies outside the domain")
    if not -1e-14 <= t <= 1 + 1e-14:
        raise ValueError(f"time {t} outside [0, 1]")
    V = nodal_solution(system, U, t)
    return float(_bary_row(op.gx, x) @ V @ _bary_row(op.gy, y))


def error_report(system: CollocationSystem, U: np.ndarray, exact: Optional[Callable] = None,
                 t_samples: int = ERROR_T_SAMPLES) -> float:
    """Max abs error over interior nodes and ``t_samples`` uniform times in [0, 1]."""
    exact = exact or system.problem.exact
    if exact is None:
        raise ValueError("error report needs an exact solution")
    ts = np.linspace(0.0, 1.0, t_samples)
    approx = eval_row(system.basis, ts) @ np.asarray(U).reshape(system.N + 1, -1)
    X, Y = system.op.interior_x, system.op.interior_y
    ref = np.array([exact(t, X, Y) for t in ts])
    return float(np.max(np.abs(approx - ref)))


def convergence_orders(errors, hs=None) -> list:
    """``log2(E_prev / E)`` between successive entries; None where h does not halve."""
    orders = [None]
    for i in range(1, len(errors)):
        if hs is not None and not np.isclose(hs[i - 1], 2 * hs[i]):
            orders.append(None)
            continue
        orders.append(float(np.log2(errors[i - 1] / errors[i])))
    return orders


def t1_condition(system: CollocationSystem) -> float:
    """Condition number of ``sum_j (-1)^j B_j(0) Q^j / j!`` (small-N diagnostic)."""
    Q = system.Q
    T1 = np.zeros_like(Q)
    Qj = np.eye(Q.shape[0])
    for j in range(system.N + 1):
        T1 += (-1) ** j * system.basis.B0(j) * Qj / factorial(j)
        Qj = Qj @ Q
    return float(np.linalg.cond(T1))
