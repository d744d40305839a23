#!/usr/bin/env python3
# Carleman finite sections for dx/dt = a (1 - exp(ix)) against the exact solution,
# and the guaranteed bound on the first component.

# %%
import numpy as np

from carleman_lift.carleman import build_carleman_section, carleman_bound_report, solve_finite_section
from carleman_lift.casestudy import CaseParams, exact_solution
from carleman_lift.numerics import TimeGrid
from carleman_lift.trigpoly import TrigPoly, maclaurin

a, x0 = -1j, 0.15 + 0.05j
g = TrigPoly.case_study(a)
c = maclaurin(g, 12)
print("Maclaurin coefficients c_0..c_4:", np.round(c.coeffs[:5], 6))

# %%
# with C0 = R0 = 1 the bound holds on [0, T*]
rep = carleman_bound_report(1.0, 1.0, x0)
print(f"T* = {rep.T_star:.4f}, tilde R0 = {rep.tilde_R0:.3f}")
grid = TimeGrid.with_points(rep.T_star, 200)
x = exact_solution(CaseParams(a, x0), grid.samples)

print(" N   max error    max bound")
for N in (1, 2, 4, 8, 12):
    tr = solve_finite_section(build_carleman_section(c, N), x0, grid)
    err = np.abs(tr.component(0) - x)
    print(f"{N:2d}  {err.max():.3e}   {rep.bound(N, grid.samples).max():.3e}")

# %%
# a shifted equilibrium (b != 1) gives c_0 != 0; the section is then no longer triangular
sec = build_carleman_section(maclaurin(TrigPoly.case_study(1.0, 4 / 3), 6), 6)
print("b = 4/3 upper triangular:", sec.is_upper_triangular)
