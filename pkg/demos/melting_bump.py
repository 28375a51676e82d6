"""A sine bump of enthalpy melting into a plateau Stefan nonlinearity.

phi vanishes on [0, 1], so only the part of u above 1 diffuses. Heat from
the melted core flows outward, lifts the cold flanks over the plateau and
drains through the boundary, where phi(u) = 0 is held.
"""

import math

import numpy as np

from stefanlab import Grid, GridFunction, Nonlinearity, ProblemSpec, TimePartition, ViscosityParam, solve
from stefanlab.harness import estimate_report
from stefanlab.solver import eigen_field

grid = Grid.uniform(1, 128)
part = TimePartition(0.2, 80)
nl = Nonlinearity.stefan(plateau=(0.0, 1.0))
spec = ProblemSpec(grid, part, nl, GridFunction(grid, 3.0 * eigen_field(grid)))

traj = solve(spec, ViscosityParam(math.inf))

print(" t       max u    |u|_L1   melted fraction")
for m in range(0, part.steps + 1, 10):
    u = traj.states[m]
    melted = np.mean(u > 1.0)
    print(f"{part.times()[m]:.3f}   {u.max():7.4f}  {grid.lp(u, 1):7.4f}   {melted:.3f}")

rep = estimate_report(traj, spec, ViscosityParam(math.inf), r_list=(2.0,), k_list=(0.5, 1.0))
print()
for name, value in rep.scalars().items():
    print(f"{name:16s} {value:.5g}")
