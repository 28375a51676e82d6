"""Watch the viscous approximations settle as n grows.

Runs the reference viscosity sweep and prints, per n, the estimate
functionals, the H^-1 distance to the next run and the viscous-term
diagnostic. |u_n|_{L2 H1} may grow at most like sqrt(n); phi(u_n) stays
bounded in L2 H1 no matter what.

visc_term is measured against a fixed probe family (low modes plus seeded
noise). For any fixed probe the pairing stays bounded, so the printed
column falls like 1/n, faster than the worst-case C/sqrt(n).
"""

import math

from stefanlab.verify import visc_sweep_from_config

cfg, sweep = visc_sweep_from_config()

cols = ("u_L2H10", "phi_u_L2H10", "dtu_L2Hm1", "visc_term")
print("     n  " + "  ".join(f"{c:>12s}" for c in cols) + "    cauchy_Hm1  visc*sqrt(n)")
for i, (n, rep) in enumerate(zip(sweep.axis, sweep.reports)):
    cauchy = sweep.cauchy_Hm1[i] if i < len(sweep.cauchy_Hm1) else float("nan")
    vals = "  ".join(f"{getattr(rep, c):12.5g}" for c in cols)
    print(f"{n:6g}  {vals}  {cauchy:12.4g}  {rep.visc_term * math.sqrt(n):12.4g}")

print()
for name, slope in sorted(sweep.fitted_slopes.items()):
    print(f"log-log slope of {name:12s} {slope:+.3f}")
