#!/usr/bin/env python3
# The concise Carleman-Fourier chain z_k = exp(ikx) for the same case study:
# the error has a closed form, and the guaranteed time range is compared with
# the sharp one.

# %%
import math

import numpy as np

from carleman_lift.carleman_fourier import build_concise_cf, case_study_bound_report, solve_concise_cf
from carleman_lift.casestudy import (CaseParams, actual_time_range, cf_guaranteed_time_range,
                                     exact_error, exp_neg_ix)
from carleman_lift.numerics import TimeGrid
from carleman_lift.trigpoly import TrigPoly

p = CaseParams(1j, 0.4 + 0.3j)
grid = TimeGrid.with_points(0.5, 101)
for N in (1, 5, 10):
    z = solve_concise_cf(build_concise_cf(TrigPoly.case_study(p.a), N), p.x0, grid)
    err = np.abs(z.component(0) * exp_neg_ix(p, grid.samples) - 1)
    print(f"N={N:2d}  max error {err.max():.3e}  closed form {exact_error(p, N, grid.samples).max():.3e}")

# %%
rep = case_study_bound_report(p.x0)
print(f"R = {rep.R:.3f}, T*_CF = {rep.T_cf_star:.4f}")
for im in (0.0, 2.0):
    print(f"Im x0 = {im}: guaranteed {cf_guaranteed_time_range(im):.4f}, "
          f"actual at phi=0 {actual_time_range(0.0, im):.4f}")

# %%
# the sharp range over phi = arg a, clamped at 3 as in the time-range plot
for phi in np.linspace(-math.pi / 2, 0, 5):
    print(f"phi = {phi:+.3f}: T* = {min(actual_time_range(phi, 0.0), 3.0):.4f}")
