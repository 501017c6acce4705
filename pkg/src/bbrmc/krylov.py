"""Dense LU factorizations and restarted GMRES with right preconditioning."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg as sla

__all__ = ["SingularMatrixError", "LuFactor", "lu_factor", "lu_solve", "GmresReport", "gmres"]

PIVOT_RTOL = 1e-14


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when an LU pivot falls below ``PIVOT_RTOL * ||A||_inf``."""

    def __init__(self, name: str, index: int, pivot: float):
        super().__init__(f"{name} is numerically singular: pivot {index} has magnitude {pivot:.3e}")
        self.name = name
        self.index = index
        self.pivot = pivot


@dataclass(frozen=True)
class LuFactor:
    """Partial-pivoted LU of a square matrix (LAPACK ``getrf`` layout)."""

    n: int
    lu: np.ndarray = field(repr=False)
    piv: np.ndarray = field(repr=False)
    min_pivot: float
    min_pivot_index: int

    def permutation(self) -> np.ndarray:
        """Row permutation ``p`` with ``A[p] = L U``."""
        p = np.arange(self.n)
        for i, j in enumerate(self.piv):
            p[i], p[j] = p[j], p[i]
        return p


def lu_factor(A, name: str = "matrix") -> LuFactor:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    scale = np.max(np.sum(np.abs(A), axis=1), initial=0.0)
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrixError
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=True)
    pivots = np.abs(np.diag(lu))
    k = int(np.argmin(pivots)) if pivots.size else 0
    if pivots.size and (scale == 0 or pivots[k] < PIVOT_RTOL * scale):
        raise SingularMatrixError(name, k, float(pivots[k]))
    lu.setflags(write=False)
    piv.setflags(write=False)
    return LuFactor(A.shape[0], lu, piv, float(pivots[k]) if pivots.size else 0.0, k)


def lu_solve(F: LuFactor, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape[0] != F.n:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, factor has {F.n}")
    return sla.lu_solve((F.lu, F.piv), b, check_finite=False)


@dataclass
class GmresReport:
    solution: np.ndarray = field(repr=False)
    iterations: int
    restarts: int
    residual_history: List[float] = field(repr=False)
    converged: bool
    true_residual: float
    orthogonality_loss: float = 0.0

    @property
    def residual(self) -> float:
        return self.residual_history[-1]


def _identity(v):
    return v


def gmres(
    apply_A: Callable,
    b,
    apply_Minv: Optional[Callable] = None,
    tol: float = 1e-10,
    restart: Optional[int] = 30,
    max_cycles: int = 200,
) -> GmresReport:
    """Right-preconditioned restarted GMRES from a zero initial guess.

    Solves ``A M^-1 y = b`` and returns ``x = M^-1 y``. Convergence is the
    relative residual ``||b - A x|| / ||b|| <= tol``; the true residual is
    recomputed at the end of every cycle. ``restart=None`` disables restarts
    (the Krylov space may then grow to the full dimension).
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    Minv = apply_Minv or _identity
    m = n if restart is None else min(restart, n)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    history = [1.0]
    if bnorm == 0:
        return GmresReport(x, 0, 0, [0.0], True, 0.0)

    total = 0
    cycles = 0
    ortho = 0.0
    r = b.copy()
    beta = bnorm
    converged = False
    while cycles < max_cycles:
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        j_done = 0
        for j in range(m):
            w = apply_A(Minv(V[j]))
            # modified Gram-Schmidt, repeated once to hold orthogonality near convergence
            for _ in range(2):
                for i in range(j + 1):
                    c = w @ V[i]
                    H[i, j] += c
                    w = w - c * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            breakdown = H[j + 1, j] <= 1e-14 * np.linalg.norm(H[: j + 2, j])
            if not breakdown:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            j_done = j + 1
            history.append(abs(g[j + 1]) / bnorm)
            if history[-1] <= tol or breakdown:
                break
        Vk = V[:j_done]
        ortho = max(ortho, float(np.max(np.abs(Vk @ Vk.T - np.eye(j_done)))))
        y = sla.solve_triangular(H[:j_done, :j_done], g[:j_done])
        x = x + Minv(y @ Vk)
        cycles += 1
        r = b - apply_A(x)
        beta = np.linalg.norm(r)
        if beta / bnorm <= tol:
            converged = True
            break
    true_res = float(beta / bnorm)
    return GmresReport(x, total, cycles - 1, history, converged, true_res, ortho)
