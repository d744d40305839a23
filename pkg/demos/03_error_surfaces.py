#!/usr/bin/env python3
# Error surfaces over initial values and the figure data sets.
# Writes into ./demo_out (PNG files only when matplotlib is installed).

# %%
from pathlib import Path

import numpy as np

from carleman_lift import experiments as ex

out = Path("demo_out")
spec = ex.GridSpec(nx=21, ny=21, T_star=0.5, N=10, scheme="carleman", a=-1j)
grid = ex.error_grid_carleman(spec)
print("E_C range:", grid.values.min(), grid.values.max())
print("mean over |x0| <= 0.3:", ex.mean_error_in_disk(grid, 0.3))

# %%
cfg = ex.GridSpec(nx=21, ny=21, T_star=0.5, N=10, scheme="cf", a=1.0)
cf_grid = ex.error_grid_cf(cfg)
print("solver vs closed form, max |diff|:",
      np.max(np.abs(cf_grid.values - ex.clamp(cf_grid.closed_form))))

# %%
try:
    import matplotlib  # noqa: F401
    png = True
except ImportError:
    png = False
for fig_id in ("fig3-left", "fig3-right", "fig5"):
    files = ex.reproduce_figure(fig_id, out / fig_id, png=png)
    print(fig_id, [f.name for f in files])
