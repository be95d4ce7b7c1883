"""
Reusing previously evaluated points
===================================

A pool of 50 random points around the base point has already been
evaluated. Pick m of them so the set looks as close to a line as possible,
optionally replacing some with new, freely placed points.
"""

import numpy as np

from noiselevel import SelectionProblem, preset, run_reuse, solve_selection

rng = np.random.default_rng(3)
h = 1e-6
base = rng.uniform(-10, 10, 6)
pool = base + rng.uniform(-h, h, (50, 6))

# a single selection problem, for each reuse budget
for R in range(6, 0, -1):
    sol = solve_selection(SelectionProblem(base, pool, 6, R=R, h=h))
    print(f"R={R}: objective {sol.objective / h:.4f} h  "
          f"pool {sol.pool_indices}  {sol.wall_time * 1e3:.0f} ms")

# the same trend seen through noise estimates
result = run_reuse(preset("reuse", m=(6,), R=tuple(range(6, 0, -1)), trials=200, seed=3))
print()
for mode, frac in result.cell(6, h, 6).success.items():
    print(f"{mode:14s} within x4: {frac:.3f}")
