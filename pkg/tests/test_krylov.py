import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bbrmc.assembly import build_system
from bbrmc.krylov import SingularMatrixError, gmres, lu_factor, lu_solve
from bbrmc.precond import apply_inverse, augment, build_preconditioner
from bbrmc.problem import builtin_problem


def test_lu_identity():
    b = np.arange(5.0)
    np.testing.assert_array_equal(lu_solve(lu_factor(np.eye(5)), b), b)


def test_lu_pivoting():
    F = lu_factor(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(lu_solve(F, [2.0, 3.0]), [3.0, 2.0])
    assert sorted(F.permutation()) == [0, 1]


def test_lu_random_residual():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((50, 50))
    b = rng.standard_normal(50)
    F = lu_factor(A)
    x = lu_solve(F, b)
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-11
    p = F.permutation()
    assert sorted(p) == list(range(50))
    L = np.tril(F.lu, -1) + np.eye(50)
    U = np.triu(F.lu)
    np.testing.assert_allclose(L @ U, A[p], atol=1e-12)


def test_lu_matrix_rhs():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((8, 8)) + 4 * np.eye(8)
    B = rng.standard_normal((8, 3))
    np.testing.assert_allclose(A @ lu_solve(lu_factor(A), B), B, atol=1e-12)


def test_lu_singular():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError) as exc:
        lu_factor(A, name="demo")
    assert exc.value.index == 1 and "demo" in str(exc.value)
    with pytest.raises(SingularMatrixError):
        lu_factor(np.zeros((3, 3)))


def test_lu_shape_errors():
    with pytest.raises(ValueError):
        lu_factor(np.ones((2, 3)))
    with pytest.raises(ValueError):
        lu_solve(lu_factor(np.eye(2)), np.ones(3))


def test_gmres_identity():
    b = np.random.default_rng(0).standard_normal(20)
    rep = gmres(lambda v: v, b)
    assert rep.converged and rep.iterations == 1
    np.testing.assert_allclose(rep.solution, b)


def test_gmres_zero_rhs():
    rep = gmres(lambda v: 2 * v, np.zeros(4))
    assert rep.converged and rep.iterations == 0 and not rep.solution.any()


def test_gmres_five_eigenvalues():
    d = np.repeat([1.0, 2.0, 3.5, -1.0, 10.0], 8)
    b = np.random.default_rng(2).standard_normal(d.size)
    rep = gmres(lambda v: d * v, b, restart=None, tol=1e-12)
    assert rep.converged and rep.iterations <= 5


def test_gmres_exact_preconditioner():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((30, 30)) + 8 * np.eye(30)
    F = lu_factor(A)
    rep = gmres(lambda v: A @ v, rng.standard_normal(30), lambda v: lu_solve(F, v))
    assert rep.converged and rep.iterations == 1


def test_gmres_stagnation_is_reported():
    # a cyclic shift: GMRES(m) stagnates for m < n
    n = 40
    b = np.zeros(n)
    b[0] = 1.0
    rep = gmres(lambda v: np.roll(v, 1), b, restart=5, max_cycles=3)
    assert not rep.converged
    assert rep.iterations == 15 and rep.restarts == 2
    assert rep.true_residual > 0.5


def test_gmres_history_monotone_and_true_residual():
    S = build_system(builtin_problem("advdiff3"), 8, 6)
    from bbrmc.assembly import apply_H
    rep = gmres(lambda v: apply_H(S, v), S.R.ravel(), restart=10, max_cycles=500, tol=1e-9)
    h = rep.residual_history
    for c in range(rep.restarts + 1):
        seg = h[1 + 10 * c: 1 + 10 * (c + 1)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(seg, seg[1:]))
    r = np.linalg.norm(S.R.ravel() - apply_H(S, rep.solution)) / np.linalg.norm(S.R)
    assert abs(r - rep.true_residual) <= 1e-12
    if rep.converged:
        assert rep.true_residual <= 1e-9


def test_gmres_preconditioned_builtin():
    S = build_system(builtin_problem("heat2"), 12, 12)
    aug = augment(S)
    pre = build_preconditioner(aug, S)
    b = aug.rhs.ravel()
    rep = gmres(aug.apply, b, lambda v: apply_inverse(pre, v))
    assert rep.converged and rep.iterations <= 6
    assert rep.true_residual <= 1e-10
    assert abs(rep.true_residual - rep.residual_history[-1]) <= 1e-12
    assert rep.orthogonality_loss <= 1e-10


def test_krylov_dimension_bound():
    S = build_system(builtin_problem("heat2"), 4, 3)
    assert S.khat == 4
    aug = augment(S)
    pre = build_preconditioner(aug, S)
    rep = gmres(aug.apply, aug.rhs.ravel(), lambda v: apply_inverse(pre, v), tol=1e-12, restart=None)
    assert rep.converged and rep.iterations <= S.khat + 1


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 25), seed=st.integers(0, 10_000), restart=st.integers(2, 30))
def test_gmres_random_well_conditioned(n, seed, restart):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) / np.sqrt(n) + 3 * np.eye(n)
    b = rng.standard_normal(n)
    rep = gmres(lambda v: A @ v, b, tol=1e-10, restart=restart, max_cycles=500)
    assert rep.converged
    assert np.linalg.norm(b - A @ rep.solution) / np.linalg.norm(b) <= 1e-10
    assert rep.orthogonality_loss <= 1e-10
