"""A JSON-defined damped wave equation with a variable diffusion coefficient.

Equivalent command line:
    bbrmc convergence --problem demos/custom_problem.json --N 12 --M 6,12,24
"""
from pathlib import Path

from bbrmc.experiments import RunConfig, run_convergence

path = Path(__file__).with_name("custom_problem.json")
for r in run_convergence(RunConfig(problem=str(path), N=(12,), M=(6, 12, 24)), write=False):
    order = "" if r["order"] is None else f"order {r['order']:.3f}"
    print(f"h={r['h']:>5}  iter={r['iter']:2d}  err={r['err']:.4e}  {order}")
