"""Problem definitions: coefficients, data, time-derivative oracles."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from math import comb
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .bernoulli import CapabilityError

__all__ = [
    "Case",
    "TimeField",
    "PdeProblem",
    "OdeProblem",
    "builtin_problem",
    "finite_difference_oracle",
    "load_problem",
    "problem_from_dict",
    "BUILTIN_NAMES",
]

BUILTIN_NAMES = ("ode1", "heat2", "advdiff3", "wave4", "telegraph5")
COEFF_NAMES = ("a1", "a2", "a3", "a4", "a5", "a6")


class Case(Enum):
    CASE1 = 1  # beta1 = 0, beta2 != 0
    CASE2 = 2  # beta2 = 0, beta1 != 0
    CASE3 = 3  # both nonzero

    @classmethod
    def from_betas(cls, beta1: float, beta2: float) -> "Case":
        if beta1 == 0 and beta2 == 0:
            raise ValueError("beta1 and beta2 cannot both vanish")
        if beta1 == 0:
            return cls.CASE1
        if beta2 == 0:
            return cls.CASE2
        return cls.CASE3


# ---------------------------------------------------------------------------
# finite differences

_FD_BASE_STEP = 1e-2
_FD_LEVELS = 3
_FD_MAX_ORDER = 8


def _stencil(fn, k, t, h, kind):
    if kind == "central":
        pts = [t + (k / 2 - j) * h for j in range(k + 1)]
    elif kind == "forward":
        pts = [t + (k - j) * h for j in range(k + 1)]
    else:
        pts = [t - j * h for j in range(k + 1)]
    total = 0.0
    for j, s in enumerate(pts):
        total = total + (-1) ** j * comb(k, j) * np.asarray(fn(s), dtype=float)
    return total / h**k


def finite_difference_oracle(base_function: Callable, k: int, t: float, lo=0.0, hi=1.0):
    """k-th derivative of ``base_function`` at ``t`` by extrapolated differences.

    Central stencils are used when they fit inside ``[lo, hi]``; otherwise a
    one-sided stencil pointing into the interval. Three Richardson levels
    with steps ``1e-2 * 2**-level``. Accuracy is roughly 1e-7 relative for
    low orders and degrades with ``k`` through round-off (``eps / h**k``).
    """
    if k < 0:
        raise ValueError("derivative order must be non-negative")
    if k > _FD_MAX_ORDER:
        raise CapabilityError(f"finite-difference derivatives beyond order {_FD_MAX_ORDER} are unsupported")
    if k == 0:
        return np.asarray(base_function(t), dtype=float)
    half = k / 2 * _FD_BASE_STEP
    if t - half >= lo and t + half <= hi:
        kind, step_pow = "central", 2
    elif t - lo < hi - t:
        kind, step_pow = "forward", 1
    else:
        kind, step_pow = "backward", 1

    table = [_stencil(base_function, k, t, _FD_BASE_STEP / 2**lev, kind) for lev in range(_FD_LEVELS)]
    # Richardson: central errors run in h^2, h^4; one-sided in h, h^2
    for m in range(1, _FD_LEVELS):
        p = step_pow * m
        table = [(2**p * table[i + 1] - table[i]) / (2**p - 1) for i in range(len(table) - 1)]
    return table[0]


# ---------------------------------------------------------------------------
# time-dependent fields


@dataclass(frozen=True)
class TimeField:
    """A field ``g(t, x, y)`` together with its time derivatives.

    ``fn(k, t, x, y)`` returns ``d^k g / dt^k``. ``max_order`` of None means
    every order is available.
    """

    fn: Callable
    max_order: Optional[int] = None

    def __call__(self, t, x, y):
        return self.derivative(0, t, x, y)

    def derivative(self, k: int, t, x, y):
        if self.max_order is not None and k > self.max_order:
            raise CapabilityError(
                f"time derivative of order {k} requested; field provides up to {self.max_order}"
            )
        return self.fn(k, t, x, y)

    def require(self, order: int, what: str = "field") -> None:
        if self.max_order is not None and order > self.max_order:
            raise CapabilityError(
                f"{what} needs time derivatives up to order {order}; only {self.max_order} available"
            )

    @classmethod
    def from_function(cls, g: Callable) -> "TimeField":
        """Wrap a value-only callable; derivatives come from finite differences."""

        def fn(k, t, x, y):
            return finite_difference_oracle(lambda s: g(s, x, y), k, t)

        return cls(fn, max_order=_FD_MAX_ORDER)

    @classmethod
    def from_derivatives(cls, derivs: Sequence[Callable]) -> "TimeField":
        """Wrap an explicit list ``[g, g_t, g_tt, ...]`` of callables."""
        derivs = tuple(derivs)
        return cls(lambda k, t, x, y: derivs[k](t, x, y), max_order=len(derivs) - 1)


def _broadcast(value, x):
    return np.broadcast_to(np.asarray(value, dtype=float), np.shape(x)).copy()


@dataclass(frozen=True)
class PdeProblem:
    """``beta1 u_tt + beta2 u_t + L u = f`` on a rectangle, ``t`` in (0, 1].

    ``L u = a1 u_xx + a2 u_xy + a3 u_yy + a4 u_x + a5 u_y + a6 u``; a
    coefficient of ``None`` is identically zero.
    """

    name: str
    beta1: float
    beta2: float
    coeffs: tuple
    source: TimeField
    alpha0: Callable
    alpha1: Callable
    boundary: TimeField
    exact: Optional[Callable] = None
    domain: tuple = (0.0, 1.0, 0.0, 1.0)

    def __post_init__(self):
        if len(self.coeffs) != 6:
            raise ValueError("expected six operator coefficients a1..a6")
        Case.from_betas(self.beta1, self.beta2)

    @property
    def case(self) -> Case:
        return Case.from_betas(self.beta1, self.beta2)

    def coefficient(self, i: int, x, y) -> Optional[np.ndarray]:
        """Samples of ``a_i`` (1-based) at ``(x, y)``, or None for a zero coefficient."""
        a = self.coeffs[i - 1]
        if a is None:
            return None
        return _broadcast(a(x, y), x)

    def required_orders(self, N: int) -> dict:
        src = N - 2 if self.case is Case.CASE1 else N - 3
        return {"source": max(src, 0), "boundary": max(N - 1, 0)}


@dataclass(frozen=True)
class OdeProblem:
    """``beta1 u'' + beta2 u' + kappa u = f`` on (0, 1] with initial data."""

    name: str
    beta1: float
    beta2: float
    kappa: float
    source: Callable  # source(k, t) -> k-th derivative of f
    alpha0: float
    alpha1: float
    exact: Optional[Callable] = None


# ---------------------------------------------------------------------------
# builtins: every example has exact solution exp(x + y + t)


def _expsum(t, x, y):
    return np.exp(np.asarray(x, dtype=float) + np.asarray(y, dtype=float) + t)


def _exp_field(scale: Callable):
    # d^k/dt^k (scale(x, y) * e^{x+y+t}) is the function itself
    return TimeField(lambda k, t, x, y: scale(x, y) * _expsum(t, x, y))


def _e_xy(x, y):
    return np.exp(np.asarray(x) + np.asarray(y))


def _const(c):
    return lambda x, y: _broadcast(c, x)


def builtin_problem(name: str):
    """The five model problems, with sources manufactured from ``exp(x+y+t)``."""
    if name == "ode1":
        return OdeProblem(
            name="ode1",
            beta1=0.0,
            beta2=1.0,
            kappa=1.0,
            source=lambda k, t: 2.0 * np.exp(t),
            alpha0=1.0,
            alpha1=1.0,
            exact=np.exp,
        )
    boundary = _exp_field(_const(1.0))
    common = dict(alpha0=_e_xy, alpha1=_e_xy, boundary=boundary, exact=_expsum)
    if name == "heat2":
        # u_t - lap(u) = f  ->  f = u - 2u
        return PdeProblem(
            name, 0.0, 1.0, (_const(-1.0), None, _const(-1.0), None, None, None),
            source=_exp_field(_const(-1.0)), **common,
        )
    if name == "advdiff3":
        def a4(x, y):
            return np.asarray(x) * np.asarray(y)

        def a5(x, y):
            return np.sin(x) * np.cos(y)

        def neg_exy(x, y):
            return -_e_xy(x, y)

        def scale(x, y):
            return 1.0 + a4(x, y) + a5(x, y) - 2.0 * _e_xy(x, y)

        return PdeProblem(
            name, 0.0, 1.0, (neg_exy, None, neg_exy, a4, a5, None),
            source=_exp_field(scale), **common,
        )
    if name == "wave4":
        return PdeProblem(
            name, 1.0, 0.0, (_const(-1.0), None, _const(-1.0), None, None, None),
            source=_exp_field(_const(-1.0)), **common,
        )
    if name == "telegraph5":
        # u_tt + 2 u_t - lap(u) + u = f  ->  f = (1 + 2 - 2 + 1) u
        return PdeProblem(
            name, 1.0, 2.0, (_const(-1.0), None, _const(-1.0), None, None, _const(1.0)),
            source=_exp_field(_const(2.0)), **common,
        )
    raise KeyError(f"unknown builtin problem {name!r}; choose from {BUILTIN_NAMES}")


# ---------------------------------------------------------------------------
# JSON problems

_ALLOWED = re.compile(r"^[\s0-9.eE+\-*/^()txy,]*$")
_FUNCS = ("exp", "sin", "cos")


def _parse(text: str):
    import sympy as sp
    from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

    if not isinstance(text, str):
        text = repr(float(text))
    stripped = text
    for f in _FUNCS:
        stripped = stripped.replace(f, "")
    if not _ALLOWED.match(stripped):
        raise ValueError(f"unsupported token in expression {text!r}")
    t, x, y = sp.symbols("t x y")
    names = {"t": t, "x": x, "y": y, "exp": sp.exp, "sin": sp.sin, "cos": sp.cos}
    expr = parse_expr(
        text,
        local_dict=names,
        global_dict={"Integer": sp.Integer, "Float": sp.Float, "Rational": sp.Rational},
        transformations=standard_transformations + (convert_xor,),
    )
    return expr, (t, x, y)


def _lambdify(expr, syms):
    import sympy as sp

    f = sp.lambdify(syms, expr, modules="numpy")

    def call(*args):
        shape = np.broadcast(*[np.asarray(a) for a in args]).shape
        return np.broadcast_to(np.asarray(f(*args), dtype=float), shape).copy()

    return call


def _time_field(text: str) -> TimeField:
    import sympy as sp

    expr, (t, x, y) = _parse(text)
    cache: dict = {}

    def fn(k, tt, xx, yy):
        if k not in cache:
            cache[k] = _lambdify(sp.diff(expr, t, k), (t, x, y))
        return cache[k](tt, xx, yy)

    return TimeField(fn)


def _space_function(text: str):
    import sympy as sp

    expr, (t, x, y) = _parse(text)
    if expr.has(t):
        raise ValueError(f"spatial expression {text!r} must not depend on t")
    f = sp.lambdify((x, y), expr, modules="numpy")
    return lambda xx, yy: _broadcast(f(xx, yy), xx)


def problem_from_dict(doc: dict) -> PdeProblem:
    """Build a problem from a JSON-style document of expression strings.

    Keys: ``beta1``, ``beta2``, ``coeffs`` (mapping ``a1``..``a6``),
    ``source``, ``alpha0``, ``alpha1``, ``boundary``, ``exact``, ``domain``
    and optionally ``case`` (1, 2, 3 or "CASE1".. for a consistency check).
    Missing ``boundary``/``alpha0``/``alpha1`` are derived from ``exact``.
    """
    import sympy as sp

    beta1 = float(doc.get("beta1", 0.0))
    beta2 = float(doc.get("beta2", 0.0))
    case = Case.from_betas(beta1, beta2)
    if "case" in doc:
        want = doc["case"]
        want = Case[want.upper()] if isinstance(want, str) else Case(int(want))
        if want is not case:
            raise ValueError(f"declared {want.name} but beta1={beta1}, beta2={beta2} give {case.name}")
    unknown = set(doc.get("coeffs", {})) - set(COEFF_NAMES)
    if unknown:
        raise ValueError(f"unknown coefficient names {sorted(unknown)}")
    coeffs = tuple(
        _space_function(doc["coeffs"][n]) if n in doc.get("coeffs", {}) else None for n in COEFF_NAMES
    )
    exact = None
    exact_expr = None
    if "exact" in doc:
        exact_expr, (t, x, y) = _parse(doc["exact"])
        exact = _lambdify(exact_expr, (t, x, y))

    def from_exact(key, k):
        if key in doc:
            return doc[key]
        if key == "alpha1" and case is Case.CASE1 and exact_expr is None:
            return "0"  # first-order in time: alpha1 is never used
        if exact_expr is None:
            raise ValueError(f"problem needs {key!r} or an exact solution")
        return str(sp.diff(exact_expr, sp.Symbol("t"), k).subs(sp.Symbol("t"), 0))

    boundary = _time_field(doc["boundary"]) if "boundary" in doc else None
    if boundary is None:
        if exact_expr is None:
            raise ValueError("problem needs 'boundary' or an exact solution")
        boundary = _time_field(str(exact_expr))
    if "source" not in doc:
        raise ValueError("problem needs a 'source' expression")
    return PdeProblem(
        name=str(doc.get("name", "json")),
        beta1=beta1,
        beta2=beta2,
        coeffs=coeffs,
        source=_time_field(doc["source"]),
        alpha0=_space_function(from_exact("alpha0", 0)),
        alpha1=_space_function(from_exact("alpha1", 1)),
        boundary=boundary,
        exact=exact,
        domain=tuple(float(v) for v in doc.get("domain", (0.0, 1.0, 0.0, 1.0))),
    )


def load_problem(path) -> PdeProblem:
    with open(Path(path)) as fh:
        return problem_from_dict(json.load(fh))
