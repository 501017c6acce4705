"""Experiment sweeps: convergence tables, ODE tables and spectrum dumps."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from .assembly import (
    CollocationSystem,
    bm_ode_solve,
    build_system,
    convergence_orders,
    error_report,
    solve_direct,
)
from .krylov import gmres
from .precond import apply_inverse, augment, build_preconditioner, preconditioned_spectrum
from .problem import BUILTIN_NAMES, OdeProblem, PdeProblem, builtin_problem, load_problem

__all__ = [
    "RunConfig",
    "SolveResult",
    "NonConvergenceError",
    "load_config",
    "resolve_problem",
    "solve",
    "run_convergence",
    "run_ode",
    "run_spectrum",
    "MODES",
]

MODES = ("gmres+pde", "dense-direct")
ONE_TOL = 1e-6


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    problem: str = "heat2"
    N: tuple = (12,)
    M: tuple = (6, 12, 24)
    dtilde: int = 5
    mode: str = "gmres+pde"
    tol: float = 1e-10
    restart: Optional[int] = 30
    max_cycles: int = 200
    out: str = "results"
    spectrum_budget: int = 4000

    def __post_init__(self):
        object.__setattr__(self, "N", tuple(int(n) for n in np.atleast_1d(self.N)))
        object.__setattr__(self, "M", tuple(int(m) for m in np.atleast_1d(self.M)))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if any(n < 1 for n in self.N):
            raise ValueError("N entries must be positive")
        if self.mode == "gmres+pde" and any(n % 2 or n < 4 for n in self.N):
            raise ValueError("gmres+pde mode needs even N >= 4")
        if any(m < 2 for m in self.M):
            raise ValueError("grid entries must be 1/M with integer M >= 2")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.restart is not None and self.restart < 1:
            raise ValueError("restart must be positive")

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def _parse_h(value) -> int:
    """Grid entry as the integer M of h = 1/M (accepts 6, "1/6", 0.1666...)."""
    if isinstance(value, str):
        frac = Fraction(value)
        if frac.numerator != 1:
            raise ValueError(f"grid size {value!r} is not of the form 1/M")
        return frac.denominator
    value = float(value)
    if value >= 2 and value == int(value):
        return int(value)
    M = round(1 / value)
    if M < 2 or abs(1 / M - value) > 1e-9:
        raise ValueError(f"grid size {value!r} is not of the form 1/M")
    return M


def load_config(path) -> RunConfig:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    kw = dict(doc)
    if "h" in kw:
        kw["M"] = tuple(_parse_h(h) for h in np.atleast_1d(kw.pop("h")))
    if "problem" in kw and not isinstance(kw["problem"], str):
        raise ValueError("'problem' must be a builtin name or a JSON path")
    if "problem" in kw and kw["problem"] not in BUILTIN_NAMES:
        p = Path(kw["problem"])
        if not p.is_absolute():
            kw["problem"] = str(Path(path).parent / p)
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(kw) - known
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    return RunConfig(**kw)


def resolve_problem(spec: str) -> Union[PdeProblem, OdeProblem]:
    if spec in BUILTIN_NAMES:
        return builtin_problem(spec)
    return load_problem(spec)


# ---------------------------------------------------------------------------
# single solves


@dataclass
class SolveResult:
    system: CollocationSystem = field(repr=False)
    U: np.ndarray = field(repr=False)
    err: Optional[float]
    iterations: Optional[int]
    seconds: float
    converged: bool = True


def solve(problem: PdeProblem, N: int, M: int, dtilde: int = 5, mode: str = "gmres+pde",
          tol: float = 1e-10, restart: Optional[int] = 30, max_cycles: int = 200,
          t_samples: int = 101) -> SolveResult:
    """Assemble and solve one sweep point; ``seconds`` excludes assembly."""
    system = build_system(problem, N, M, M, dtilde)
    if mode == "dense-direct":
        t0 = time.perf_counter()
        U = solve_direct(system)
        secs = time.perf_counter() - t0
        iters, ok = None, True
    elif mode == "gmres+pde":
        aug = augment(system)
        t0 = time.perf_counter()
        pre = build_preconditioner(aug, system)
        rep = gmres(aug.apply, aug.rhs.reshape(-1), lambda v: apply_inverse(pre, v), tol, restart, max_cycles)
        secs = time.perf_counter() - t0
        U = aug.extract(rep.solution)
        iters, ok = rep.iterations, rep.converged
    else:
        raise ValueError(f"unknown mode {mode!r}")
    err = error_report(system, U, t_samples=t_samples) if problem.exact is not None else None
    return SolveResult(system, U, err, iters, secs, ok)


# ---------------------------------------------------------------------------
# sweeps


def _fmt_err(e):
    return "" if e is None else f"{e:.3e}"


def _fmt_order(o):
    return "" if o is None else f"{o:.4f}"


def _write(path: Path, header: Sequence[str], rows: Sequence[Sequence]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_convergence(config: RunConfig, write: bool = True) -> List[dict]:
    """One row per ``(N, M)``; orders between successive halvings of h."""
    problem = resolve_problem(config.problem)
    if isinstance(problem, OdeProblem):
        raise ValueError("convergence sweeps need a PDE problem; use the ode command")
    if problem.exact is None:
        raise ValueError("convergence sweeps need an exact solution")
    rows = []
    for N in config.N:
        results = []
        for M in config.M:
            res = solve(problem, N, M, config.dtilde, config.mode, config.tol, config.restart, config.max_cycles)
            if not res.converged:
                raise NonConvergenceError(f"GMRES did not converge at N={N}, h=1/{M}")
            results.append(res)
        hs = [1.0 / M for M in config.M]
        orders = convergence_orders([r.err for r in results], hs)
        for M, r, o in zip(config.M, results, orders):
            rows.append(dict(N=N, M=M, h=f"1/{M}", iter=r.iterations, err=r.err, order=o, time=r.seconds))
    if write:
        _write_convergence(config, problem.name, rows)
    return rows


def _write_convergence(config: RunConfig, name: str, rows: List[dict]):
    out = Path(config.out)
    with_iter = config.mode == "gmres+pde"
    tag = "gmres" if with_iter else "direct"
    for N in config.N:
        sub = [r for r in rows if r["N"] == N]
        head = ["h", "iter", "err", "order"] if with_iter else ["h", "err", "order"]
        table = [
            [r["h"]] + ([r["iter"]] if with_iter else []) + [_fmt_err(r["err"]), _fmt_order(r["order"])]
            for r in sub
        ]
        _write(out / f"{name}_N{N}_{tag}.csv", head, table)
        # full precision companion; time = factorization + solve, assembly excluded
        raw = [
            [r["h"]] + ([r["iter"]] if with_iter else []) + [repr(r["err"]), repr(r["order"]), repr(r["time"])]
            for r in sub
        ]
        _write(out / f"{name}_N{N}_{tag}_raw.csv", head + ["time"], raw)


def run_ode(config: RunConfig, write: bool = True, t_samples: int = 1001) -> List[dict]:
    """Bernoulli solution of the ODE example for each N, next to ``(2 pi)^-N``."""
    problem = resolve_problem(config.problem if config.problem in BUILTIN_NAMES else "ode1")
    if not isinstance(problem, OdeProblem):
        problem = builtin_problem("ode1")
    ts = np.linspace(0.0, 1.0, t_samples)
    rows = []
    for N in config.N:
        _, u = bm_ode_solve(problem.beta1, problem.beta2, problem.kappa, problem.source,
                            problem.alpha0, problem.alpha1, N)
        err = float(np.max(np.abs(u(ts) - problem.exact(ts))))
        rows.append(dict(N=N, err=err, theory=(2 * np.pi) ** (-N)))
    if write:
        _write(
            Path(config.out) / f"{problem.name}_table.csv",
            ["N", "err", "theory"],
            [[r["N"], _fmt_err(r["err"]), _fmt_err(r["theory"])] for r in rows],
        )
    return rows


def run_spectrum(config: RunConfig, write: bool = True) -> dict:
    """Eigenvalues of the preconditioned and plain augmented operators at ``N[0], M[0]``."""
    problem = resolve_problem(config.problem)
    if isinstance(problem, OdeProblem):
        raise ValueError("spectra need a PDE problem")
    N, M = config.N[0], config.M[0]
    if N % 2 or N < 4:
        raise ValueError("spectra need even N >= 4")
    system = build_system(problem, N, M, M, config.dtilde)
    aug = augment(system)
    if aug.size > config.spectrum_budget:
        raise ValueError(
            f"spectrum needs a dense {aug.size}x{aug.size} eigenproblem; "
            f"budget is {config.spectrum_budget} (raise spectrum_budget to at least {aug.size})"
        )
    pre = build_preconditioner(aug, system)
    lam_pre = preconditioned_spectrum(pre, aug, config.spectrum_budget)
    lam_raw = preconditioned_spectrum(None, aug, config.spectrum_budget)
    count = int(np.sum(np.abs(lam_pre - 1.0) < ONE_TOL))
    bound = (N + 1) * system.khat
    if write:
        out = Path(config.out)
        for tag, lam in (("pre", lam_pre), ("raw", lam_raw)):
            _write(out / f"{problem.name}_N{N}_M{M}_spectrum_{tag}.csv", ["re", "im"],
                   [[repr(float(z.real)), repr(float(z.imag))] for z in lam])
    return dict(preconditioned=lam_pre, raw=lam_raw, count_near_one=count, bound=bound, size=aug.size)
