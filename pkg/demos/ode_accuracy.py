"""Bernoulli solution of u' + u = f with u = exp(t) against (2 pi)^-N."""
from bbrmc.experiments import RunConfig, run_ode

rows = run_ode(RunConfig(problem="ode1", N=(4, 6, 8, 10, 12, 14)), write=False)
print(f"{'N':>3} {'err':>11} {'(2pi)^-N':>11}")
for r in rows:
    print(f"{r['N']:3d} {r['err']:11.4e} {r['theory']:11.4e}")
