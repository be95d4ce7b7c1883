"""
Collinear versus random sample points
=====================================

For the quadratic with multiplicative noise and a tiny box, random points
in the box estimate the noise as well as equally spaced points on a line.
For the sixth-power test function with a large box they do not.
"""

from noiselevel import preset, run_geometry, run_grid

trials = 500

geo = run_geometry(preset("geometry", m=(6, 12), trials=trials, seed=1))
for cell in geo.cells:
    print(f"quadratic, m={cell.m}: KS D={cell.ks.statistic:.3f}  p={cell.ks.p_value:.3f}")

grid = run_grid(preset("grid", n=(2, 10), h=(1e-2, 1e-8), trials=trials, seed=1))
print()
for cell in grid.cells:
    s = cell.success
    print(f"power sum, n={cell.n:2d} h={cell.h:.0e}: "
          f"within x4  standard {s['Standard']:.2f}  arbitrary {s['Arbitrary']:.2f}")
