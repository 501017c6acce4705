"""Command-line driver: ``bbrmc ode|solve|convergence|spectrum --config cfg.json``."""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .experiments import (
    MODES,
    NonConvergenceError,
    RunConfig,
    load_config,
    resolve_problem,
    run_convergence,
    run_ode,
    run_spectrum,
    solve,
)
from .krylov import SingularMatrixError

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_SINGULAR = 0, 2, 3, 4


class _ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _int_list(text: str):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bbrmc", description="Bernoulli-barycentric space-time solver experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in [
        ("ode", "ODE accuracy table (N, err, theory)"),
        ("solve", "single solve at the first N and M"),
        ("convergence", "grid refinement table (h, iter, err, order)"),
        ("spectrum", "eigenvalue dumps of the preconditioned and plain augmented operators"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--problem", help="builtin name or problem JSON path")
        p.add_argument("--N", type=_int_list, help="Bernoulli orders, e.g. 12 or 6,8,10")
        p.add_argument("--M", type=_int_list, help="subintervals per direction (h = 1/M), e.g. 6,12,24")
        p.add_argument("--dtilde", type=int, help="barycentric blending parameter")
        p.add_argument("--tol", type=float, help="GMRES relative tolerance")
        p.add_argument("--restart", type=int, help="GMRES restart length")
        p.add_argument("--mode", choices=MODES, help="solver mode")
        p.add_argument("--out", help="output directory")
    return parser


def _config(args) -> RunConfig:
    base = load_config(args.config) if args.config else RunConfig()
    return base.with_overrides(
        problem=args.problem, N=args.N, M=args.M, dtilde=args.dtilde, tol=args.tol,
        restart=args.restart, mode=args.mode, out=args.out,
    )


def _run(args) -> int:
    try:
        cfg = _config(args)
    except (OSError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise _ConfigError(str(exc)) from exc

    if args.command == "ode":
        for r in run_ode(cfg):
            print(f"N={r['N']:3d}  err={r['err']:.4e}  theory={r['theory']:.4e}")
    elif args.command == "solve":
        try:
            problem = resolve_problem(cfg.problem)
        except (OSError, KeyError, ValueError) as exc:
            raise _ConfigError(str(exc)) from exc
        res = solve(problem, cfg.N[0], cfg.M[0], cfg.dtilde, cfg.mode, cfg.tol, cfg.restart, cfg.max_cycles)
        if not res.converged:
            raise NonConvergenceError(f"GMRES did not converge (N={cfg.N[0]}, h=1/{cfg.M[0]})")
        it = "" if res.iterations is None else f"  iter={res.iterations}"
        err = "n/a" if res.err is None else f"{res.err:.4e}"
        print(f"{problem.name}  N={cfg.N[0]}  h=1/{cfg.M[0]}{it}  err={err}  time={res.seconds:.3f}s")
    elif args.command == "convergence":
        for r in run_convergence(cfg):
            it = "" if r["iter"] is None else f"  iter={r['iter']:3d}"
            order = "" if r["order"] is None else f"  order={r['order']:.4f}"
            print(f"N={r['N']}  h={r['h']:>5s}{it}  err={r['err']:.4e}{order}  time={r['time']:.3f}s")
    elif args.command == "spectrum":
        s = run_spectrum(cfg)
        print(
            f"{s['count_near_one']} of {s['size']} preconditioned eigenvalues within 1e-6 of 1 "
            f"(lower bound {s['bound']})"
        )
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    try:
        return _run(args)
    except _ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularMatrixError as exc:
        print(f"singular matrix: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except NonConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (KeyError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
