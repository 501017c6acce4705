"""Bernoulli polynomials on [0, 1] and the operational integration matrix."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Callable, List

import numpy as np

__all__ = [
    "BernoulliBasis",
    "build_basis",
    "eval_row",
    "integration_matrix",
    "project_coefficients",
    "gauss_legendre_01",
    "MAX_ORDER",
]

MAX_ORDER = 20
GAUSS_POINTS = 32


class CapabilityError(ValueError):
    """A derivative oracle cannot supply a requested derivative order."""


def _exact_coefficients(n_max: int) -> List[List[Fraction]]:
    # B_n = n * antiderivative(B_{n-1}) + c, with c fixed by zero mean on [0, 1]
    coeffs = [[Fraction(1)]]
    for n in range(1, n_max + 1):
        prev = coeffs[-1]
        cur = [Fraction(0)] + [Fraction(n) * c / (j + 1) for j, c in enumerate(prev)]
        mean = sum(c / (j + 1) for j, c in enumerate(cur))
        cur[0] = -mean
        coeffs.append(cur)
    return coeffs


@dataclass(frozen=True)
class BernoulliBasis:
    """Bernoulli polynomials ``B_0 .. B_{N+1}`` and the matrix ``P``.

    ``monomial_coeffs[n, j]`` is the coefficient of ``t**j`` in ``B_n``.
    ``exact_coeffs`` keeps the rational table used to build it.
    """

    order: int
    exact_coeffs: tuple = field(repr=False)
    monomial_coeffs: np.ndarray = field(repr=False)
    bernoulli_numbers: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.order

    def B0(self, n: int) -> float:
        """Bernoulli number ``B_n(0)``."""
        return float(self.bernoulli_numbers[n])

    def __call__(self, t, n: int | None = None):
        """Evaluate ``B_n(t)`` (or the full row ``B(t)`` when ``n`` is None)."""
        if n is None:
            return eval_row(self, t)
        return _horner(self.monomial_coeffs[n], np.asarray(t, dtype=float))


def build_basis(N: int) -> BernoulliBasis:
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ValueError(f"invalid Bernoulli order N={N!r}; need an integer N >= 1")
    if N > MAX_ORDER:
        raise ValueError(f"Bernoulli order N={N} exceeds supported maximum {MAX_ORDER}")
    N = int(N)
    exact = _exact_coefficients(N + 1)
    table = np.zeros((N + 2, N + 2))
    for n, row in enumerate(exact):
        table[n, : len(row)] = [float(c) for c in row]
    numbers = np.array([float(row[0]) for row in exact])
    table.setflags(write=False)
    numbers.setflags(write=False)
    P = _integration_matrix(numbers, N)
    P.setflags(write=False)
    return BernoulliBasis(
        order=N,
        exact_coeffs=tuple(tuple(r) for r in exact),
        monomial_coeffs=table,
        bernoulli_numbers=numbers,
        P=P,
    )


def _horner(c: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    for a in c[::-1]:
        out = out * t + a
    return out


def eval_row(basis: BernoulliBasis, t, include_tail: bool = False) -> np.ndarray:
    """Row vector ``[B_0(t), ..., B_N(t)]``.

    For array ``t`` the result has shape ``t.shape + (N+1,)``. With
    ``include_tail`` the extra column ``B_{N+1}(t)`` is appended.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1e-14) or np.any(t_arr > 1 + 1e-14):
        raise ValueError("Bernoulli basis is only defined for t in [0, 1]")
    n_cols = basis.order + (2 if include_tail else 1)
    # powers t^j, j = 0..N+1
    powers = t_arr[..., None] ** np.arange(basis.order + 2)
    return powers @ basis.monomial_coeffs[:n_cols].T


def _integration_matrix(numbers: np.ndarray, N: int) -> np.ndarray:
    P = np.zeros((N + 1, N + 1))
    for j in range(N):
        P[0, j] = -numbers[j + 1] / (j + 1)
        P[j + 1, j] = 1.0 / (j + 1)
    return P


def integration_matrix(basis: BernoulliBasis) -> np.ndarray:
    """Matrix ``P`` with ``int_0^t B(s) ds = B(t) P + tail(t) e_{N+1}^T``."""
    return np.array(basis.P)


def integration_tail(basis: BernoulliBasis, t) -> np.ndarray:
    """Scalar tail ``(B_{N+1}(t) - B_{N+1}(0)) / (N+1)`` of the integration identity."""
    N = basis.order
    bt = _horner(basis.monomial_coeffs[N + 1], np.asarray(t, dtype=float))
    return (bt - basis.bernoulli_numbers[N + 1]) / (N + 1)


def gauss_legendre_01(n: int = GAUSS_POINTS):
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


DerivativeOracle = Callable[[int, float], float]


def project_coefficients(
    derivative_oracle: DerivativeOracle,
    N: int,
    quadrature_order: int = GAUSS_POINTS,
) -> np.ndarray:
    """Bernoulli-series coefficients ``g_0 .. g_N`` of a smooth ``g`` on [0, 1].

    ``derivative_oracle(k, t)`` must return ``g^(k)(t)``; orders up to
    ``N - 1`` are requested. ``g_0`` is the mean of ``g``; for ``n >= 1``
    ``g_n = (g^(n-1)(1) - g^(n-1)(0)) / n!``.

    The oracle may return arrays (one column per spatial point); the result
    then has shape ``(N+1,) + value.shape``.
    """
    ts, ws = gauss_legendre_01(quadrature_order)
    g0 = sum(w * np.asarray(derivative_oracle(0, t), dtype=float) for t, w in zip(ts, ws))
    out = [g0]
    for n in range(1, N + 1):
        try:
            d1 = derivative_oracle(n - 1, 1.0)
            d0 = derivative_oracle(n - 1, 0.0)
        except CapabilityError:
            raise
        except (IndexError, KeyError, NotImplementedError) as exc:
            raise CapabilityError(
                f"derivative of order {n - 1} is required for N={N}"
            ) from exc
        out.append((np.asarray(d1, dtype=float) - np.asarray(d0, dtype=float)) / factorial(n))
    return np.array(out)
