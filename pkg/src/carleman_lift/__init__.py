"""
Carleman and Carleman-Fourier linearization of scalar ODEs ``dx/dt = g(x)``
with trigonometric-polynomial right-hand sides.
"""

from .carleman import build_carleman_section, carleman_bound, solve_finite_section
from .carleman_fourier import (build_cf_section, build_concise_cf, cf_bound, recover_state,
                               solve_cf_section, solve_concise_cf)
from .casestudy import (CaseParams, actual_time_range, cf_guaranteed_time_range, classify_trajectory,
                        detect_blowup, exact_solution)
from .errors import CarlemanError
from .numerics import TimeGrid, Trajectory, rk45, solve_upper_triangular_linear
from .trigpoly import TrigPoly, maclaurin

__version__ = "0.1.0"
