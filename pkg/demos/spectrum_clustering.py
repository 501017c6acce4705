"""Eigenvalues of the preconditioned and plain augmented operators.

Counts eigenvalues near 1 for each builtin problem on a small grid and
writes the CSV dumps to ./spectra for plotting.
"""
import numpy as np

from bbrmc.experiments import RunConfig, run_spectrum

for name in ["heat2", "advdiff3", "wave4", "telegraph5"]:
    s = run_spectrum(RunConfig(problem=name, N=(12,), M=(6,), out="spectra"))
    pre, raw = s["preconditioned"], s["raw"]
    print(
        f"{name:11s} size {s['size']:4d}  near 1: {s['count_near_one']:4d} (bound {s['bound']})  "
        f"max |lambda-1| pre {np.max(np.abs(pre - 1)):9.3e}  raw {np.max(np.abs(raw - 1)):9.3e}"
    )
