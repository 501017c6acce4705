"""Grid refinement for the four builtin space-time problems at N = 12.

Each row solves the collocation system twice, with preconditioned GMRES
and with a direct solve, and reports errors and observed orders.
"""
import sys

from bbrmc.experiments import RunConfig, run_convergence

grids = (6, 12, 24)
names = sys.argv[1:] or ["heat2", "advdiff3", "wave4", "telegraph5"]
for name in names:
    it = run_convergence(RunConfig(problem=name, N=(12,), M=grids), write=False)
    dd = run_convergence(RunConfig(problem=name, N=(12,), M=grids, mode="dense-direct"), write=False)
    print(f"\n{name}")
    print(f"{'h':>5} {'iter':>4} {'err (gmres)':>12} {'order':>7} {'err (direct)':>13}")
    for a, b in zip(it, dd):
        order = "" if a["order"] is None else f"{a['order']:.3f}"
        print(f"{a['h']:>5} {a['iter']:4d} {a['err']:12.4e} {order:>7} {b['err']:13.4e}")
