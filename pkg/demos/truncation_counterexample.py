"""Why truncation convergence needs p > 1.

v_n equals n^a on n tiny intervals ]i/n, i/n + 1/n^2[. With a = 1 every v_n
has mass one, its truncations vanish in L^1 like k/n, and pairings with
smooth probes converge to the integral of the probe: v_n tends weakly to the
constant 1 while staying at L^1 distance one from it. With a = 3 the mass is
n^2 and no weak limit exists.
"""

from stefanlab.trunclab import PROBES, counterexample_report

for a in (1.0, 3.0):
    rep = counterexample_report((10, 100, 1000), a)
    print(f"a = {a:g}: masses {rep.masses}")
    for k, vals in rep.truncated_l1.items():
        print(f"   |T_{k:g} v_n|_1 = {vals}")
    for name, vals in rep.pairings.items():
        exact = PROBES[name][1]
        print(f"   <v_n, {name:4s}> = {[round(v, 4) for v in vals]}   (integral {exact:.4f})")
    print(f"   weak convergence to the indicator: {rep.weak_convergence_to_indicator}")
    for note in rep.notes:
        print(f"   note: {note}")
    print()
