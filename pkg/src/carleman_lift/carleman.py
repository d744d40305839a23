"""
Carleman finite sections ``dx_N/dt = A_N x_N + a_N`` over the monomials
``x, x^2, ..., x^N`` and the convergence-bound machinery for their first
component.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientCoefficients, InvalidBound, OutOfTimeRange
from .numerics import rk45, solve_linear_expm, solve_upper_triangular_linear


@dataclass(frozen=True, eq=False)
class CarlemanSection:
    N: int
    A: np.ndarray
    a: np.ndarray
    source: object

    @property
    def is_upper_triangular(self):
        return bool(np.all(np.tril(self.A, -1) == 0))


def build_carleman_section(c, N):
    """
    Leading ``N x N`` section of the Carleman state matrix.

    Entry ``(k, k')`` (one-based) is ``k c_{k'-k+1}`` for ``k' >= k-1`` and
    zero otherwise, i.e. ``diag(1..N)`` times a Toeplitz band of the Maclaurin
    coefficients. The affine term is ``[c_0, 0, ..., 0]``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if c.n_max < N:
        raise InsufficientCoefficients(f"need Maclaurin coefficients up to order {N}, have {c.n_max}")
    A = np.zeros((N, N), dtype=complex)
    for k in range(1, N + 1):
        for kp in range(max(k - 1, 1), N + 1):
            A[k - 1, kp - 1] = k * c.coeffs[kp - k + 1]
    a = np.zeros(N, dtype=complex)
    a[0] = c.coeffs[0]
    return CarlemanSection(N, A, a, c)


def monomial_initial_state(x0, N):
    """``[x0, x0^2, ..., x0^N]`` by repeated multiplication."""
    out = np.empty(N, dtype=complex)
    p = complex(1.0)
    for k in range(N):
        p = p * complex(x0)
        out[k] = p
    return out


def solve_finite_section(sec, x0, grid, method="auto", rtol=1e-11, atol=1e-13):
    """
    Trajectory of ``[x_{1,N}, ..., x_{N,N}]`` with ``x_{k,N}(0) = x0^k``.

    ``method="auto"`` uses the exact triangular solver when ``c_0 == 0`` and
    the matrix-exponential propagator otherwise; ``"rk45"`` forces the
    adaptive integrator.
    """
    y0 = monomial_initial_state(x0, sec.N)
    A, b = sec.A, sec.a
    if method == "rk45":
        return rk45(lambda t, y: A @ y + b, y0, grid, rtol=rtol, atol=atol)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if b[0] == 0:
        return solve_upper_triangular_linear(A, b, y0, grid)
    return solve_linear_expm(A, b, y0, grid)


def tilde_R0(R0, x0):
    return max(1.0, R0 * abs(x0) * math.e ** 2)


def carleman_time_range(C0, R0, x0):
    """Guaranteed time range ``T*`` for the first-component bound."""
    rt = tilde_R0(R0, x0)
    r = abs(x0)
    log_term = math.inf if r == 0 else math.log(rt / (math.e * R0 * r))
    return rt / (C0 * (rt + 1.0) * math.exp(rt)) * min(log_term, 2.0)


@dataclass(frozen=True)
class CarlemanBoundReport:
    C0: float
    R0: float
    x0: complex
    tilde_R0: float
    T_star: float

    def bound(self, N, t):
        return carleman_bound(self.C0, self.R0, self.x0, N, t)


def carleman_bound_report(C0, R0, x0):
    if C0 <= 0 or R0 <= 0:
        raise ValueError("C0 and R0 must be positive")
    return CarlemanBoundReport(float(C0), float(R0), complex(x0), tilde_R0(R0, x0),
                               carleman_time_range(C0, R0, x0))


def carleman_bound(C0, R0, x0, N, t):
    """
    Upper bound on ``|x_{1,N}(t) - x(t)|`` for ``0 <= t <= T*``.

    ``t`` may be an array; the result has its shape.

    Raises
    ------
    OutOfTimeRange
        If any ``t`` exceeds ``T*``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    t = np.asarray(t, dtype=float)
    T_star = carleman_time_range(C0, R0, x0)
    if np.any(t > T_star * (1 + 1e-12)) or np.any(t < 0):
        raise OutOfTimeRange(f"t outside [0, T*] with T* = {T_star:.6g}")
    rt = tilde_R0(R0, x0)
    pref = rt * math.exp(rt) / (math.sqrt(2 * math.pi) * R0) * N ** -1.5
    r = abs(x0)
    if r == 0:
        out = np.zeros_like(t)
    else:
        # evaluate the N-th power in log space
        log_base = math.log(R0 * r * math.e / rt) + C0 * (1 + 1 / rt) * math.exp(rt) * t
        out = pref * np.exp(N * log_base)
    return float(out) if out.ndim == 0 else out


def local_state_bound(C0, R0, x0, M0):
    """
    Time ``T`` with ``|x(t)| <= M0`` guaranteed on ``[0, T]``.

    ``T = M0 R0 / (C0 (exp(R0 M0) - 1)) * ln(M0 / |x0|)``.
    """
    r = abs(x0)
    if not M0 > r:
        raise InvalidBound("M0 must exceed |x0|")
    if r == 0:
        return math.inf
    return M0 * R0 / (C0 * math.expm1(R0 * M0)) * math.log(M0 / r)


def first_component_error(traj, reference):
    """``|x_{1,N}(t) - x(t)|`` on the trajectory samples."""
    return np.abs(traj.component(0) - np.asarray(reference))

