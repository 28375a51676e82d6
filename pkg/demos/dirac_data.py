"""Concentrating initial data in 2D: L^1-bounded, nothing better.

A Gaussian of fixed mass is halved in width at every level. The solution
stays bounded in L2(L^r) for r below d/(d-1) = 2, while larger r pick up
the concentration. Gradients of truncations T_k(phi(u)) scale like
k(k+1) uniformly in the level.
"""

from stefanlab.verify import l1_sweep_from_config

cfg, sweep = l1_sweep_from_config()
print(f"widths: {[round(cfg['sweep.width0'] * cfg['sweep.ratio'] ** -l, 4) for l in sweep.axis]}")
print()
print("level " + "".join(f"  r={r:<5g}" for r in cfg["exponents.r"]) + "  beta_grad")
for lev, rep in zip(sweep.axis, sweep.reports):
    cols = "".join(f"  {rep.u_L2Lr[r]:7.3f}" for r in cfg["exponents.r"])
    print(f"{lev:5d} {cols}  {rep.beta_grad_L2:9.4f}")

print()
for key, flag in sweep.flags.items():
    if isinstance(flag, dict):
        print(f"{key:16s} growth {flag['growth']:.3f}  {flag['trend']}")
