"""
Carleman-Fourier finite sections.

The extended state ``[x, -x]`` is lifted to ``y_alpha = exp(i(alpha_1 - alpha_2) x)``
for nonzero multi-indices ``alpha = (alpha_1, alpha_2)`` of nonnegative
integers. Grouping by order ``|alpha| = k`` gives a block-upper-triangular
state matrix; when ``g`` carries nonnegative frequencies only, the chain
``z_k = y_(k,0)`` closes on its own (the concise form).
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (AssumptionViolated, BranchJump, GateFailed, InitialOutOfStrip,
                     NegativeFrequencyPresent, OutOfTimeRange)
from .numerics import Trajectory, principal_log, rk45, solve_upper_triangular_linear
from .trigpoly import has_nonnegative_frequencies_only

E = math.e


@lru_cache(maxsize=None)
def multi_indices(N):
    """Multi-indices of order 1..N, blockwise, ``(k,0), (k-1,1), ..., (0,k)``."""
    return tuple((k - j, j) for k in range(1, N + 1) for j in range(k + 1))


def block_offset(k):
    """Position of the first index of order ``k`` in the stacked state."""
    return (k - 1) * (k + 2) // 2


def cf_dimension(N):
    return N * (N + 3) // 2


def h_coefficient(g, gamma):
    """Entry ``h_gamma``: ``g_m`` on the first axis, ``g_{-m}`` on the second."""
    g1, g2 = gamma
    if g2 == 0 and 0 <= g1 <= g.M:
        return g[g1]
    if g1 == 0 and 1 <= g2 <= g.M:
        return g[-g2]
    return 0j


@dataclass(frozen=True, eq=False)
class CFSection:
    N: int
    M: int
    matrix: np.ndarray
    indices: tuple

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def block(self, k, l):
        """Block ``B_kl`` of shape ``(k+1, l+1)``."""
        r, c = block_offset(k), block_offset(l)
        return self.matrix[r:r + k + 1, c:c + l + 1]

    def position(self, alpha):
        a1, a2 = alpha
        return block_offset(a1 + a2) + a2


def build_cf_section(g, N):
    """
    Order-``N`` section of the Carleman-Fourier state matrix.

    Entry ``(alpha, beta)`` is ``i (alpha_1 - alpha_2) h_{beta - alpha}``;
    blocks with ``l - k > M`` vanish.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    idx = multi_indices(N)
    D = len(idx)
    B = np.zeros((D, D), dtype=complex)
    for r, (a1, a2) in enumerate(idx):
        if a1 == a2:
            continue
        k = a1 + a2
        for l in range(k, min(k + g.M, N) + 1):
            off = block_offset(l)
            for j in range(l + 1):
                b1, b2 = l - j, j
                h = h_coefficient(g, (b1 - a1, b2 - a2))
                if h != 0:
                    B[r, off + j] = 1j * (a1 - a2) * h
    return CFSection(N, g.M, B, idx)


def cf_initial_state(x0, N):
    """``y_alpha(0) = exp(i (alpha_1 - alpha_2) x0)`` in block order."""
    d = np.array([a1 - a2 for a1, a2 in multi_indices(N)], dtype=float)
    return np.exp(1j * d * complex(x0))


def solve_cf_section(sec, x0, grid, method="exact"):
    """
    Solve the block section; block ``k = N`` first, down to ``k = 1``.

    ``method="rk45"`` integrates the same system with the adaptive solver.
    """
    y0 = cf_initial_state(x0, sec.N)
    if method == "exact":
        return solve_upper_triangular_linear(sec.matrix, 0.0, y0, grid)
    if method == "rk45":
        B = sec.matrix
        return rk45(lambda t, y: B @ y, y0, grid, rtol=1e-12, atol=1e-14)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True, eq=False)
class ConciseCFSection:
    N: int
    G: np.ndarray


def build_concise_cf(g, N):
    """Single-chain section with entry ``(k, l) = i k g_{l-k}`` for ``l >= k``."""
    if not has_nonnegative_frequencies_only(g):
        raise NegativeFrequencyPresent("concise form needs g_m = 0 for all m < 0")
    if N < 1:
        raise ValueError("N must be at least 1")
    G = np.zeros((N, N), dtype=complex)
    for k in range(1, N + 1):
        for l in range(k, min(k + g.M, N) + 1):
            G[k - 1, l - 1] = 1j * k * g[l - k]
    return ConciseCFSection(N, G)


def solve_concise_cf(sec, x0, grid):
    """``z_{k,N}`` with ``z_{k,N}(0) = exp(i k x0)``, solved exactly."""
    z0 = np.exp(1j * np.arange(1, sec.N + 1) * complex(x0))
    return solve_upper_triangular_linear(sec.G, 0.0, z0, grid)


# --- bounds -----------------------------------------------------------------

def D0_theorem(g, R):
    """``2 max(|g_0|, (|g_1|+|g_-1|) R, ..., (|g_M|+|g_-M|) R^M)``."""
    vals = [abs(g[0])] + [(abs(g[m]) + abs(g[-m])) * R ** m for m in range(1, g.M + 1)]
    return 2.0 * max(vals)


def D0_remark(g, R):
    """``max(|g_0|, |g_1| R, ..., |g_M| R^M)`` over nonnegative frequencies."""
    return max(abs(g[m]) * R ** m for m in range(0, g.M + 1))


def optimal_R(x0):
    """``exp(|Im x0| + 2)``: maximizes the case-study guaranteed range."""
    return math.exp(abs(complex(x0).imag) + 2.0)


def cf_constant(x0, R):
    s = (3 * E - 1) / (2 * E - 1)
    im = abs(complex(x0).imag)
    return math.exp(s * im + s * math.log(R) - E / (2 * E - 1)) / (math.sqrt(2 * math.pi) * (E - 1))


def cf_time_range(x0, R, D0):
    im = abs(complex(x0).imag)
    return (E - 1) / ((2 * E - 1) * D0) * (math.log(R) - im - 1.0)


@dataclass(frozen=True)
class CFBoundReport:
    R: float
    D0: float
    C0: float
    T_cf_star: float
    x0: complex

    def bound(self, N, t):
        """Bound on ``|y^±_{1,N}(t) exp(∓ i x(t)) - 1|``; ``t`` may be an array."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.T_cf_star * (1 + 1e-12)):
            raise OutOfTimeRange(f"t outside [0, T*_CF] with T*_CF = {self.T_cf_star:.6g}")
        im = abs(self.x0.imag)
        expo = (E - 1) * N / (2 * E - 1)
        log_val = (math.log(self.C0) - 1.5 * math.log(N) + self.D0 * N * t
                   + expo * (im + 1.0 - math.log(self.R)))
        out = np.exp(log_val)
        return float(out) if out.ndim == 0 else out


def cf_bound_report(g, x0, R, D0=None):
    """
    Constants for the first-block bound.

    ``D0`` defaults to :func:`D0_theorem`; the case study passes ``D0 = R``.

    Raises
    ------
    InitialOutOfStrip
        If ``|Im x0| >= ln R - 1``.
    """
    if not R > E:
        raise ValueError("R must exceed e")
    x0 = complex(x0)
    if not abs(x0.imag) < math.log(R) - 1.0:
        raise InitialOutOfStrip(f"|Im x0| = {abs(x0.imag):.6g} is not below ln R - 1 = {math.log(R) - 1:.6g}")
    if D0 is None:
        D0 = D0_theorem(g, R)
    return CFBoundReport(float(R), float(D0), cf_constant(x0, R), cf_time_range(x0, R, D0), x0)


def cf_bound(g, x0, R, N, t, D0=None):
    return cf_bound_report(g, x0, R, D0).bound(N, t)


def case_study_bound_report(x0, R=None):
    """Case-study constants: ``D0(R)`` replaced by ``R``, ``R`` optimal by default."""
    if R is None:
        R = optimal_R(x0)
    return cf_bound_report(None, x0, R, D0=R)


@dataclass(frozen=True)
class GlobalRateParams:
    mu0: float
    R: float
    D0: float
    rate: float

    @property
    def converges(self):
        return self.rate < 1.0


def global_rate(g, x0, R):
    """
    Whole-line rate ``(D0 + mu0) ||exp(i [x0, -x0])||_2 / (mu0 R)``.

    Raises
    ------
    AssumptionViolated
        ``clause`` is one of ``"nonnegative"``, ``"mu0"``, ``"R"``, ``"initial"``.
    """
    x0 = complex(x0)
    if not has_nonnegative_frequencies_only(g):
        raise AssumptionViolated("g must have nonnegative frequencies only", clause="nonnegative")
    mu0 = g[0].imag
    if not mu0 > 0:
        raise AssumptionViolated(f"Im g_0 = {mu0:.6g} must be positive", clause="mu0")
    if not R > math.exp(abs(x0.imag) + 1.0):
        raise AssumptionViolated("R must exceed exp(|Im x0| + 1)", clause="R")
    D0 = D0_remark(g, R)
    if not math.exp(-x0.imag) < mu0 * R / (D0 + mu0):
        raise AssumptionViolated("exp(-Im x0) must be below mu0 R / (D0 + mu0)", clause="initial")
    norm = math.hypot(abs(np.exp(1j * x0)), abs(np.exp(-1j * x0)))
    return GlobalRateParams(mu0, float(R), D0, (D0 + mu0) * norm / (mu0 * R))


# --- state recovery ---------------------------------------------------------

def recover_state(y1, x0, sign=1, reference=None, gate_bound=None, times=None):
    """
    Recover ``xi = -i ln y`` from the first-block trajectory ``y``.

    Parameters
    ----------
    y1 : Trajectory or array_like
        Samples of ``y^+_{1,N}`` (``sign=1``) or ``y^-_{1,N}`` (``sign=-1``).
        A multi-component trajectory uses component 0 for ``+`` and 1 for ``-``.
    x0 : complex
        Initial state; ``xi(0) = sign * x0`` exactly.
    reference : array_like, optional
        Exact ``x(t)``; enforces ``|y exp(-i sign x) - 1| <= 1/2``.
    gate_bound : array_like or float, optional
        Precomputed bound values; must not exceed 1/2.

    Returns
    -------
    Trajectory
        Single component ``xi(t)``; each sample takes the logarithm branch
        nearest to the previous sample.

    Raises
    ------
    GateFailed
        If the gate is violated.
    BranchJump
        If consecutive unwrapped samples differ by more than pi.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if isinstance(y1, Trajectory):
        times = y1.t
        col = 0 if (y1.dim == 1 or sign == 1) else 1
        y = y1.component(col)
    else:
        y = np.asarray(y1, dtype=complex).reshape(-1)
        if times is None:
            times = np.arange(y.size, dtype=float)
    if reference is not None:
        dev = np.abs(y * np.exp(-1j * sign * np.asarray(reference, dtype=complex)) - 1.0)
        if np.any(dev > 0.5):
            raise GateFailed(f"max |y exp(-i x) - 1| = {dev.max():.3g} exceeds 1/2")
    if gate_bound is not None and np.any(np.asarray(gate_bound) > 0.5):
        raise GateFailed("bound exceeds 1/2 on the window")

    raw = -1j * principal_log(y)
    xi = np.empty_like(raw)
    xi[0] = sign * complex(x0)
    two_pi = 2 * math.pi
    for j in range(1, raw.size):
        shift = np.round((xi[j - 1].real - raw[j].real) / two_pi)
        xi[j] = raw[j] + two_pi * shift
        if abs(xi[j] - xi[j - 1]) > math.pi:
            raise BranchJump(f"samples {j - 1} and {j} differ by more than pi")
    return Trajectory(times, xi, None, "log-recovery")
