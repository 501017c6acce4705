"""Dimension-expanded systems and their block-factorized preconditioners.

Every block of the augmented operators is ``a I + b Q`` for scalars ``a, b``,
so an operator is stored as two small coefficient arrays ``(C_I, C_Q)`` and
applied as ``Y = C_I X + C_Q (X Q^T)`` with ``X`` the stacked blocks.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from .assembly import CollocationSystem
from .bernoulli import build_basis
from .krylov import LuFactor, SingularMatrixError, lu_factor, lu_solve
from .problem import Case

__all__ = [
    "AugmentedSystem",
    "DePreconditioner",
    "SolveCounter",
    "augment",
    "augment_blocks",
    "drop_set",
    "build_preconditioner",
    "apply_inverse",
    "dense_preconditioner",
    "dense_factors",
    "preconditioned_spectrum",
    "remainder_T",
    "SPECTRUM_BUDGET",
]

SPECTRUM_BUDGET = 4000
IDENTITY_RTOL = 1e-10
VALIDATE_MAX_KHAT = 16


@dataclass
class SolveCounter:
    """Tally of Q-level and auxiliary LU solves (one per block right-hand side)."""

    q: int = 0
    aux: int = 0


# ---------------------------------------------------------------------------
# augmented systems


def augment_blocks(case: Case, N: int, beta1: float, beta2: float):
    """Coefficient arrays ``(C_I, C_Q)`` of the augmented operator.

    CASE1 applies the row transform first, so its block rows are the
    transformed ones. Unknown layout: CASE1 ``[-U^N, U^0..U^N]``;
    CASE2/3 ``[-U^{N-1}, -U^N, U^0..U^N]``.
    """
    basis = build_basis(N)
    P = np.array(basis.P)
    n = N + 1
    if case is Case.CASE1:
        S = _s_tilde(basis)
        HI, HQ = S, S @ P
        # the transformed first row carries no Q part: the telescoping is exact
        HQ[0] = 0.0
        nb = N + 2
        CI = np.zeros((nb, nb))
        CQ = np.zeros((nb, nb))
        CI[:n, 1:] = HI
        CQ[:n, 1:] = HQ
        CI[0, 0] += 1.0
        CI[0, N + 1] += 1.0
        CI[N + 1, 0] = 1.0
        CI[N + 1, N + 1] = 1.0
        return CI, CQ
    P2 = P @ P
    HI = beta1 * np.eye(n) + beta2 * P
    HQ = P2
    nb = N + 3
    CI = np.zeros((nb, nb))
    CQ = np.zeros((nb, nb))
    CI[:n, 2:] = HI
    CQ[:n, 2:] = HQ
    CI[0, 0] += 1.0
    CI[0, N + 1] += 1.0  # U^{N-1}
    CI[1, 1] += 1.0
    CI[1, N + 2] += 1.0  # U^N
    CI[N + 1, 0] = 1.0
    CI[N + 1, N + 1] = 1.0
    CI[N + 2, 1] = 1.0
    CI[N + 2, N + 2] = 1.0
    return CI, CQ


def _s_tilde(basis) -> np.ndarray:
    S = np.eye(basis.N + 1)
    S[0, 1:] = basis.bernoulli_numbers[1 : basis.N + 1]
    return S


@dataclass(frozen=True)
class AugmentedSystem:
    case: Case
    N: int
    CI: np.ndarray = field(repr=False)
    CQ: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)  # (block_count, khat)
    beta1: float = 0.0
    beta2: float = 1.0

    @property
    def block_count(self) -> int:
        return self.CI.shape[0]

    @property
    def khat(self) -> int:
        return self.Q.shape[0]

    @property
    def size(self) -> int:
        return self.block_count * self.khat

    @property
    def offset(self) -> int:
        """Number of leading duplicate blocks."""
        return 1 if self.case is Case.CASE1 else 2

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[0] != self.size:
            raise ValueError(f"vector length {v.shape[0]} does not match augmented size {self.size}")
        X = v.reshape(self.block_count, self.khat, -1)
        QX = np.einsum("ij,bjm->bim", self.Q, X)
        Y = np.tensordot(self.CI, X, axes=1) + np.tensordot(self.CQ, QX, axes=1)
        return Y.reshape(v.shape)

    def dense(self) -> np.ndarray:
        return np.kron(self.CI, np.eye(self.khat)) + np.kron(self.CQ, self.Q)

    def extract(self, w: np.ndarray) -> np.ndarray:
        """Original unknowns ``U`` as ``(N+1, khat)`` from an augmented vector."""
        W = np.asarray(w).reshape(self.block_count, self.khat)
        return W[self.offset :].copy()

    def duplicate_mismatch(self, w: np.ndarray) -> float:
        """Max violation of the duplicate blocks ``-U^N`` (and ``-U^{N-1}``)."""
        W = np.asarray(w).reshape(self.block_count, self.khat)
        if self.case is Case.CASE1:
            return float(np.max(np.abs(W[0] + W[-1])))
        return float(max(np.max(np.abs(W[0] + W[-2])), np.max(np.abs(W[1] + W[-1]))))


def augment(system: CollocationSystem) -> AugmentedSystem:
    N = system.N
    if N % 2:
        raise ValueError(f"augmented systems need an even Bernoulli order, got N={N}")
    CI, CQ = augment_blocks(system.case, N, system.beta1, system.beta2)
    R = np.asarray(system.R)
    k = system.khat
    if system.case is Case.CASE1:
        rhs = np.vstack([_s_tilde(system.basis) @ R, np.zeros((1, k))])
    else:
        rhs = np.vstack([R, np.zeros((2, k))])
    return AugmentedSystem(system.case, N, CI, CQ, np.asarray(system.Q), rhs, system.beta1, system.beta2)


# ---------------------------------------------------------------------------
# drop sets and dense factor oracles


def drop_set(case: Case, N: int, beta1: float, beta2: float) -> List[Tuple[int, int, float]]:
    """Blocks ``(row, col, a)`` whose identity part ``a I`` is removed from the augmented operator."""
    if case is Case.CASE1:
        return [(N - 1, N, 1.0)]
    # rows are original block rows (0-based), columns point at U^c = c + 2
    drops = [(N - 3, N - 1, beta1), (N - 2, N, beta1)]
    if case is Case.CASE3:
        drops += [
            (N - 2, N - 1, beta2 / (N - 2)),
            (N - 1, N, beta2 / (N - 1)),
            (N, N + 1, beta2 / N),
        ]
    return drops


def _pde_coefficients(case, N, beta1, beta2):
    CI, CQ = augment_blocks(case, N, beta1, beta2)
    for r, c, a in drop_set(case, N, beta1, beta2):
        CI[r, c] -= a
    return CI, CQ


def _require_even(N):
    if N % 2 or N < 4:
        raise ValueError(
            f"dimension-expanded preconditioners need an even Bernoulli order N >= 4, got N={N}"
        )


def _phat(P2):
    return lambda i, j: P2[i - 1, j - 1]


def _put(M, i, j, B, k):
    M[i * k : (i + 1) * k, j * k : (j + 1) * k] = B


def dense_factors(case: Case, N: int, Q: np.ndarray, beta1: float = 0.0, beta2: float = 1.0) -> list:
    """Dense factor matrices whose product is the preconditioner.

    Written out block by block from the factor formulas, independently of
    :func:`apply_inverse`. ``N`` must be even; the identities are only
    guaranteed for ``N >= 4``.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    k = Q.shape[0]
    I = np.eye(k)
    Qi = np.linalg.inv(Q)
    basis = build_basis(N)
    Bn = basis.bernoulli_numbers
    P2 = basis.P @ basis.P
    ph = _phat(P2)
    if case is Case.CASE1:
        nb = N + 2
        D1 = np.eye(nb * k)
        _put(D1, 0, N + 1, (1 + Bn[N]) * I, k)
        _put(D1, N, N + 1, I, k)
        D2 = np.zeros((nb * k, nb * k))
        _put(D2, 0, 0, -Bn[N] * I, k)
        for i in range(1, N):
            _put(D2, i, i, Q / i, k)
            if i < N - 1:
                _put(D2, i, i + 1, I, k)
        _put(D2, N, N, Q / N, k)
        _put(D2, N + 1, N + 1, I, k)
        D3 = np.eye(nb * k)
        for j in range(1, N):
            _put(D3, 0, j, -Bn[j - 1] / Bn[N] * I, k)
        D4 = np.eye(nb * k)
        _put(D4, N, 0, -N * Qi, k)
        _put(D4, N + 1, 0, I, k)
        return [D1, D2, D3, D4]

    nb = N + 3
    CI, CQ = _pde_coefficients(case, N, beta1, beta2)
    D1 = np.kron(CI, I) + np.kron(CQ, Q)
    D1[:, : 2 * k] = 0.0
    swap = np.eye(nb * k)
    swap[: 2 * k, : 2 * k] = 0.0
    _put(swap, 0, 1, I, k)
    _put(swap, 1, 0, I, k)
    closure = np.eye(nb * k)
    _put(closure, N + 1, 0, I, k)
    _put(closure, N + 2, 1, I, k)
    if case is Case.CASE2:
        th1 = ph(1, N - 2) / ph(N, N - 2)
        th2 = ph(1, N - 1) / ph(N + 1, N - 1)
        th3 = ph(2, N - 2) / ph(N, N - 2)
        th4 = -ph(2, N)
        _put(D1, 0, 0, th2 * I, k)
        _put(D1, 0, 1, th1 * I - ph(1, N) * Q, k)
        _put(D1, 1, 1, th4 * Q + th3 * I, k)
        D3 = np.eye(nb * k)
        _put(D3, N - 1, 0, -Qi / ph(N, N - 2), k)
        _put(D3, N, 1, -Qi / ph(N + 1, N - 1), k)
        return [D1, swap, D3, closure]

    v = _v_table(Bn, N, beta1, beta2)
    T1, T2, T3 = _thetas3(Q, Qi, ph, v, N, beta1)
    _put(D1, 0, 0, T1, k)
    _put(D1, 0, 1, T2, k)
    _put(D1, 1, 1, T3, k)
    D2 = np.eye(nb * k)
    _put(D2, 0, 0, Qi / ph(N + 1, N - 1), k)
    D4 = np.eye(nb * k)
    _put(D4, N - 1, 0, -beta1 * Qi / ph(N, N - 2), k)
    _put(D4, N, 1, -beta1 * Qi / ph(N + 1, N - 1), k)
    return [D1, D2, swap, D4, closure]


def _v_table(Bn, N, beta1, beta2):
    v = np.zeros(N + 1)
    v[1] = beta1 - beta2 * Bn[1]
    for j in range(2, N + 1):
        v[j] = -beta2 * Bn[j] / j
    return v


def _thetas3(Q, Qi, ph, v, N, beta1):
    I = np.eye(Q.shape[0])
    T1 = beta1 * (ph(1, N - 1) * Q + v[N - 1] * I)
    T2 = -ph(1, N) * Q + v[N - 2] * beta1 * Qi / ph(N, N - 2) + (beta1 * ph(1, N - 2) / ph(N, N - 2) - v[N]) * I
    T3 = -ph(2, N) * Q + beta1 * ph(2, N - 2) / ph(N, N - 2) * I
    return T1, T2, T3


def _identity_error(case, N, Q, beta1, beta2) -> float:
    k = Q.shape[0]
    CI, CQ = _pde_coefficients(case, N, beta1, beta2)
    target = np.kron(CI, np.eye(k)) + np.kron(CQ, Q)
    prod = np.linalg.multi_dot(dense_factors(case, N, Q, beta1, beta2))
    return float(np.max(np.abs(prod - target)) / np.max(np.abs(target)))


@lru_cache(maxsize=None)
def _validated_template(case: Case, N: int, beta1: float, beta2: float) -> bool:
    rng = np.random.default_rng(1234)
    Q = rng.standard_normal((2, 2)) + 4.0 * np.eye(2)
    err = _identity_error(case, N, Q, beta1, beta2)
    if err > IDENTITY_RTOL:
        raise RuntimeError(f"factorization identity fails for {case.name}, N={N}: relative error {err:.2e}")
    return True


# ---------------------------------------------------------------------------
# preconditioner


@dataclass(frozen=True)
class DePreconditioner:
    case: Case
    N: int
    Q: np.ndarray = field(repr=False)
    lu_Q: LuFactor = field(repr=False)
    aux: tuple = field(repr=False)  # LuFactors: () / (theta4 Q + theta3 I,) / (T1, T3)
    CI: np.ndarray = field(repr=False)
    CQ: np.ndarray = field(repr=False)
    drops: tuple = ()
    bernoulli0: np.ndarray = field(default=None, repr=False)
    P2: np.ndarray = field(default=None, repr=False)
    scalars: dict = field(default_factory=dict, repr=False)
    beta1: float = 0.0
    beta2: float = 1.0

    @property
    def khat(self) -> int:
        return self.Q.shape[0]

    @property
    def block_count(self) -> int:
        return self.CI.shape[0]

    @property
    def size(self) -> int:
        return self.block_count * self.khat

    def expected_solves(self) -> Tuple[int, int]:
        """``(Q-solves, auxiliary solves)`` per application."""
        if self.case is Case.CASE1:
            return self.N + 1, 0
        if self.case is Case.CASE2:
            return self.N + 1, 1
        return self.N + 2, 2


def build_preconditioner(aug: AugmentedSystem, system: Optional[CollocationSystem] = None) -> DePreconditioner:
    case, N = aug.case, aug.N
    _require_even(N)
    Q = np.asarray(aug.Q, dtype=float)
    k = Q.shape[0]
    b1, b2 = aug.beta1, aug.beta2
    lu_Q = lu_factor(Q, name="Q")
    _validated_template(case, N, b1, b2)
    basis = build_basis(N)
    Bn = np.array(basis.bernoulli_numbers)
    P2 = basis.P @ basis.P
    ph = _phat(P2)
    CI, CQ = _pde_coefficients(case, N, b1, b2)
    scalars: dict = {}
    aux: tuple = ()
    I = np.eye(k)
    if case is Case.CASE2:
        scalars.update(
            theta1=ph(1, N - 2) / ph(N, N - 2),
            theta2=ph(1, N - 1) / ph(N + 1, N - 1),
            theta3=ph(2, N - 2) / ph(N, N - 2),
            theta4=-ph(2, N),
            theta5=-ph(N, N - 2),
            theta6=-ph(N + 1, N - 1),
        )
        aux = (lu_factor(scalars["theta4"] * Q + scalars["theta3"] * I, name="theta4*Q + theta3*I"),)
    elif case is Case.CASE3:
        v = _v_table(Bn, N, b1, b2)
        scalars["v"] = v
        T1 = b1 * (ph(1, N - 1) * Q + v[N - 1] * I)
        T3 = -ph(2, N) * Q + b1 * ph(2, N - 2) / ph(N, N - 2) * I
        aux = (lu_factor(T1, name="Theta1"), lu_factor(T3, name="Theta3"))
    # the auxiliary factors are nonsingular here, so the dense identity is well defined
    if k <= VALIDATE_MAX_KHAT:
        err = _identity_error(case, N, Q, b1, b2)
        if err > IDENTITY_RTOL:
            raise RuntimeError(f"factorization identity fails on this Q: relative error {err:.2e}")
    for arr in (CI, CQ, Bn, P2):
        arr.setflags(write=False)
    return DePreconditioner(
        case, N, Q, lu_Q, aux, CI, CQ, tuple(drop_set(case, N, b1, b2)), Bn, P2, scalars, b1, b2
    )


def dense_preconditioner(pre: DePreconditioner) -> np.ndarray:
    return np.kron(pre.CI, np.eye(pre.khat)) + np.kron(pre.CQ, pre.Q)


def apply_inverse(pre: DePreconditioner, r: np.ndarray, counter: Optional[SolveCounter] = None) -> np.ndarray:
    """``P_DE^{-1} r`` by inverting the block factors in turn.

    ``r`` may be a vector or a matrix of column right-hand sides. A block
    solve on ``m`` columns counts as one solve.
    """
    r = np.asarray(r, dtype=float)
    if r.shape[0] != pre.size:
        raise ValueError(f"vector length {r.shape[0]} does not match preconditioner size {pre.size}")
    cnt = counter if counter is not None else SolveCounter()
    Y = r.reshape(pre.block_count, pre.khat, -1).copy()

    def qsolve(b):
        cnt.q += 1
        return lu_solve(pre.lu_Q, b)

    def asolve(i, b):
        cnt.aux += 1
        return lu_solve(pre.aux[i], b)

    if pre.case is Case.CASE1:
        _inverse_case1(pre, Y, qsolve)
    else:
        _inverse_case23(pre, Y, qsolve, asolve)
    return Y.reshape(r.shape)


def _inverse_case1(pre, Y, qsolve):
    N = pre.N
    Bn = pre.bernoulli0
    # first factor: identity plus the last block column
    Y[0] -= (1 + Bn[N]) * Y[N + 1]
    Y[N] -= Y[N + 1]
    # block diagonal: scalar, upper bidiagonal Q-hat, Q/N
    Y[0] /= -Bn[N]
    Y[N - 1] = (N - 1) * qsolve(Y[N - 1])
    for i in range(N - 2, 0, -1):
        Y[i] = i * qsolve(Y[i] - Y[i + 1])
    Y[N] = N * qsolve(Y[N])
    # first block row elimination
    for j in range(1, N):
        Y[0] += Bn[j - 1] / Bn[N] * Y[j]
    # first block column elimination
    Y[N] += N * qsolve(Y[0])
    Y[N + 1] -= Y[0]


def _row_sum(pre, Y, row, skip):
    """``sum_c (C_I[row,c] + C_Q[row,c] Q) Y[c]`` over columns ``c >= 2``, ``c != skip``."""
    cols = [c for c in range(2, pre.block_count) if c != skip]
    acc = np.zeros_like(Y[0])
    accq = np.zeros_like(Y[0])
    anyq = False
    for c in cols:
        if pre.CI[row, c]:
            acc += pre.CI[row, c] * Y[c]
        if pre.CQ[row, c]:
            accq += pre.CQ[row, c] * Y[c]
            anyq = True
    if anyq:
        acc += pre.Q @ accq
    return acc


def _inverse_case23(pre, Y, qsolve, asolve):
    N = pre.N
    ph = _phat(pre.P2)
    X = np.zeros_like(Y)
    # leading factor: closure rows give the last two blocks, then the chain
    X[N + 1] = Y[N + 1]
    X[N + 2] = Y[N + 2]
    for rho in range(N, 1, -1):
        rhs = Y[rho] - _row_sum(pre, X, rho, skip=rho)
        X[rho] = qsolve(rhs) / pre.CQ[rho, rho]
    rhs1 = Y[1] - _row_sum(pre, X, 1, skip=-1)
    rhs0 = Y[0] - _row_sum(pre, X, 0, skip=-1)
    if pre.case is Case.CASE2:
        s = pre.scalars
        X[1] = asolve(0, rhs1)
        X[0] = (rhs0 - (s["theta1"] * X[1] - ph(1, N) * (pre.Q @ X[1]))) / s["theta2"]
        X[0], X[1] = X[1].copy(), X[0].copy()
    else:
        b1 = pre.beta1
        v = pre.scalars["v"]
        X[1] = asolve(1, rhs1)
        T2x = (
            -ph(1, N) * (pre.Q @ X[1])
            + v[N - 2] * b1 / ph(N, N - 2) * qsolve(X[1])
            + (b1 * ph(1, N - 2) / ph(N, N - 2) - v[N]) * X[1]
        )
        X[0] = asolve(0, rhs0 - T2x)
        X[0] = ph(N + 1, N - 1) * (pre.Q @ X[0])
        X[0], X[1] = X[1].copy(), X[0].copy()
    b1 = pre.beta1 if pre.case is Case.CASE3 else 1.0
    X[N - 1] += b1 * qsolve(X[0]) / ph(N, N - 2)
    X[N] += b1 * qsolve(X[1]) / ph(N + 1, N - 1)
    X[N + 1] -= X[0]
    X[N + 2] -= X[1]
    Y[...] = X


# ---------------------------------------------------------------------------
# spectra


def preconditioned_spectrum(pre: Optional[DePreconditioner], aug: AugmentedSystem,
                            limit: int = SPECTRUM_BUDGET) -> np.ndarray:
    """Eigenvalues of ``P_DE^{-1} A`` (or of ``A`` itself when ``pre`` is None)."""
    n = aug.size
    if n > limit:
        raise ValueError(f"spectrum needs a dense {n}x{n} matrix; budget is {limit}")
    A = aug.dense()
    if pre is not None:
        A = apply_inverse(pre, A)
    return sla.eigvals(A, check_finite=False)


def remainder_T(N: int, Q: np.ndarray) -> np.ndarray:
    """Dense ``T = s_N delta_1`` whose shifted spectrum ``1 + eig(T)`` completes ``P_DE1^{-1} A``.

    Built from ``sigma_i = (N - i) Q^{-1}`` and the last block column
    ``s_i`` of the inverse of the bidiagonal ``Q-hat``.
    """
    Bn = build_basis(N).bernoulli_numbers
    Qi = np.linalg.inv(np.atleast_2d(Q))
    k = Qi.shape[0]
    sigma = {i: (N - i) * Qi for i in range(N)}
    s = {}
    for i in range(1, N):
        prod = np.eye(k)
        for m in range(1, N - i + 1):
            prod = prod @ sigma[m]
        s[i] = (-1) ** (N - 1 - i) * prod
    delta1 = sum(Bn[i - 1] * s[i] for i in range(1, N)) / Bn[N]
    return sigma[0] @ delta1
