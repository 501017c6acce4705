"""Floater-Hormann barycentric rational interpolation on uniform 1D grids."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RationalGrid",
    "make_grid",
    "fh_weights",
    "diff_matrices",
    "interior_matrices",
    "interpolate",
]

DEFAULT_DTILDE = 5
_NODE_TOL = 1e-14


def fh_weights(
    a: float,
    b: float,
    M: int,
    d: int,
    nodes: np.ndarray | None = None,
    normalize: bool = True,
) -> np.ndarray:
    """Floater-Hormann weights ``w_0 .. w_M``, scaled to ``max |w| = 1`` by default.

    Each weight is a signed sum over the local stencils ``s .. s+d``
    containing node ``m``. Products are accumulated as log-magnitudes so
    that fine grids (``h**-d`` scaling) do not overflow.
    """
    if M < 1:
        raise ValueError(f"need M >= 1 subintervals, got {M}")
    if not 0 <= d <= M:
        raise ValueError(f"blending parameter d={d} must satisfy 0 <= d <= M={M}")
    x = np.linspace(a, b, M + 1) if nodes is None else np.asarray(nodes, dtype=float)

    terms: list[list[tuple[float, float]]] = [[] for _ in range(M + 1)]
    for m in range(M + 1):
        for s in range(max(0, m - d), min(m, M - d) + 1):
            diffs = x[m] - np.delete(x[s : s + d + 1], m - s)
            sign = (-1.0) ** s * np.prod(np.sign(diffs))
            terms[m].append((sign, -np.sum(np.log(np.abs(diffs)))))

    shift = max(lg for t in terms for _, lg in t) if normalize else 0.0
    w = np.array([sum(sg * np.exp(lg - shift) for sg, lg in t) for t in terms])
    return w / np.max(np.abs(w)) if normalize else w


@dataclass(frozen=True)
class RationalGrid:
    """Uniform grid on ``[a, b]`` with ``M`` subintervals and blending ``d``."""

    a: float
    b: float
    M: int
    d: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    D1_full: np.ndarray = field(repr=False)
    D2_full: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.M


def make_grid(a: float, b: float, M: int, d: int = DEFAULT_DTILDE) -> RationalGrid:
    nodes = np.linspace(a, b, M + 1)
    w = fh_weights(a, b, M, d, nodes)
    D1, D2 = _diff(nodes, w)
    for arr in (nodes, w, D1, D2):
        arr.setflags(write=False)
    return RationalGrid(a, b, M, d, nodes, w, D1, D2)


def _diff(x: np.ndarray, w: np.ndarray):
    if np.any(w == 0):
        i = int(np.flatnonzero(w == 0)[0])
        raise ValueError(f"degenerate barycentric weight at node {i}")
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    ratio = w[None, :] / w[:, None]
    D1 = ratio / dx
    np.fill_diagonal(D1, 0.0)
    # sum_{k != i} (w_k/w_i)/(x_i - x_k) == -D1[i, i]
    s = D1.sum(axis=1)
    D2 = -2.0 * D1 * (s[:, None] + 1.0 / dx)
    np.fill_diagonal(D2, 0.0)
    np.fill_diagonal(D1, -D1.sum(axis=1))
    np.fill_diagonal(D2, -D2.sum(axis=1))
    return D1, D2


def diff_matrices(grid: RationalGrid):
    """First and second differentiation matrices on all grid nodes."""
    return np.array(grid.D1_full), np.array(grid.D2_full)


def interior_matrices(grid: RationalGrid):
    """Interior blocks ``(T, T2)`` and their boundary columns.

    Returns ``(T, T2, B1, B2)`` where ``T``/``T2`` are the first/second
    derivative matrices restricted to interior rows and columns and
    ``B1``/``B2`` are the ``(M-1, 2)`` columns for nodes ``0`` and ``M``.
    """
    if grid.M < 2:
        raise ValueError("grid has no interior nodes (M < 2)")
    inner = slice(1, grid.M)
    ends = [0, grid.M]
    T = grid.D1_full[inner, inner].copy()
    T2 = grid.D2_full[inner, inner].copy()
    B1 = grid.D1_full[inner][:, ends].copy()
    B2 = grid.D2_full[inner][:, ends].copy()
    return T, T2, B1, B2


def interpolate(grid: RationalGrid, values, x):
    """Evaluate the barycentric rational interpolant at ``x`` (scalar or array)."""
    v = np.asarray(values, dtype=float)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < grid.a - 1e-12) or np.any(xs > grid.b + 1e-12):
        raise ValueError("interpolation point outside the grid interval")
    diff = xs[:, None] - grid.nodes[None, :]
    hit = np.abs(diff) < _NODE_TOL * (grid.b - grid.a)
    on_node = hit.any(axis=1)
    diff[hit] = 1.0
    kern = grid.weights[None, :] / diff
    out = (kern @ v) / kern.sum(axis=1)
    if on_node.any():
        out[on_node] = v[np.argmax(hit[on_node], axis=1)]
    return out if np.ndim(x) else float(out[0])
