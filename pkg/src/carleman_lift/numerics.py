"""
Complex-arithmetic kernels: principal logarithm, an adaptive Dormand-Prince
integrator for complex vector fields, and an exact solver for linear systems
with upper-triangular constant state matrices. General constant linear
systems on uniform grids go through the matrix exponential.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.linalg import expm

from .errors import DomainError, NotUpperTriangular, StepSizeUnderflow

OVERFLOW_GUARD = 1e12


def principal_log(z):
    """
    Principal branch of the complex logarithm.

    Parameters
    ----------
    z : complex or array_like
        Nonzero argument(s).

    Returns
    -------
    complex or numpy.ndarray
        ``ln|z| + i Arg(z)`` with ``Arg(z)`` in ``(-pi, pi]``.

    Notes
    -----
    ``numpy.log`` maps a negative real with a signed-zero imaginary part
    ``-0.0`` to ``-i pi``; that value is moved to ``+i pi`` here so the
    branch cut belongs to the upper half plane.
    """
    arr = np.asarray(z, dtype=complex)
    if np.any(arr == 0):
        raise DomainError("logarithm of zero")
    arg = np.angle(arr)
    arg = np.where(arg == -np.pi, np.pi, arg)
    out = np.log(np.abs(arr)) + 1j * arg
    if out.ndim == 0:
        return complex(out)
    return out


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time samples ``t0, ..., t1`` with ``n_steps`` intervals."""

    t0: float
    t1: float
    n_steps: int

    def __post_init__(self):
        if not self.n_steps >= 1:
            raise ValueError("n_steps must be a positive integer")
        if not self.t1 > self.t0:
            raise ValueError("t1 must exceed t0")
        if self.t0 < 0:
            raise ValueError("t0 must be nonnegative")

    @property
    def samples(self):
        return np.linspace(self.t0, self.t1, self.n_steps + 1)

    @classmethod
    def with_points(cls, t1, n_points, t0=0.0):
        """Grid of ``n_points`` samples on ``[t0, t1]``."""
        return cls(float(t0), float(t1), int(n_points) - 1)


@dataclass
class Trajectory:
    """
    Sampled solution of a (lifted) ODE.

    ``y[j, k]`` is component ``k`` at time ``t[j]``. ``valid[j]`` is False
    for samples past a numeric blow-up; those entries hold NaN.
    """

    t: np.ndarray
    y: np.ndarray
    valid: np.ndarray = None
    method: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.y = np.asarray(self.y, dtype=complex)
        if self.y.ndim == 1:
            self.y = self.y[:, None]
        if self.valid is None:
            self.valid = np.all(np.isfinite(self.y), axis=1)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)

    @property
    def dim(self):
        return self.y.shape[1]

    def component(self, k):
        """Samples of component ``k`` (zero-based)."""
        return self.y[:, k]

    @property
    def all_valid(self):
        return bool(np.all(self.valid))


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# fifth- minus fourth-order weights
_DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


def _rms(v):
    return float(np.sqrt(np.mean(np.abs(v) ** 2)))


def _initial_step(f, t0, y0, f0, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    d2 = _rms((f(t0 + h0, y1) - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


# continuous extension (Shampine), maps theta^1..theta^4 to stage weights
_DP_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


def rk45(f, y0, grid, rtol=1e-10, atol=1e-12, overflow=OVERFLOW_GUARD, max_steps=1_000_000):
    """
    Integrate ``dy/dt = f(t, y)`` with the Dormand-Prince 5(4) pair.

    Parameters
    ----------
    f : callable
        ``f(t, y) -> ndarray`` for complex state ``y``.
    y0 : array_like
        Complex initial state at ``grid.t0``.
    grid : TimeGrid
        Output samples, filled from the fourth-order continuous extension
        of each accepted step; ``grid.t1`` is always hit exactly.
    rtol, atol : float
        Local error tolerances (weighted RMS norm).
    overflow : float
        Once ``max|y|`` exceeds this value the remaining samples are marked
        invalid and integration stops.

    Returns
    -------
    Trajectory

    Raises
    ------
    StepSizeUnderflow
        If the step falls below ``1e-14 * (t1 - t0)``. The exception carries
        the partial trajectory.
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    ts = grid.samples
    y = np.array(y0, dtype=complex).reshape(-1)
    out = np.full((ts.size, y.size), np.nan + 0j)
    valid = np.zeros(ts.size, dtype=bool)
    out[0] = y
    valid[0] = True
    span = grid.t1 - grid.t0
    h_min = 1e-14 * span
    t_end = grid.t1

    t = grid.t0
    k1 = np.asarray(f(t, y), dtype=complex)
    h = _initial_step(f, t, y, k1, rtol, atol, span)
    n_steps = 0
    n_rejected = 0
    nxt = 1  # next sample to fill

    def partial():
        return Trajectory(ts, out.copy(), valid.copy(), "rk45")

    while t < t_end:
        if n_steps >= max_steps:
            raise StepSizeUnderflow("maximum number of steps exceeded", t=t, trajectory=partial())
        last = t + h >= t_end - 1e-15 * span
        h_try = t_end - t if last else h
        if h_try < h_min:
            raise StepSizeUnderflow(f"step size underflow at t={t:.6g}", t=t, trajectory=partial())
        K = np.empty((7, y.size), dtype=complex)
        K[0] = k1
        for s in range(1, 7):
            ys = y + h_try * (np.asarray(_DP_A[s]) @ K[:s])
            K[s] = f(t + _DP_C[s] * h_try, ys)
        y_new = y + h_try * (_DP_B @ K)
        err_vec = h_try * (_DP_E @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(invalid="ignore", over="ignore"):
            err = _rms(err_vec / scale)
        n_steps += 1
        if not np.isfinite(err):
            h = 0.2 * h_try
            n_rejected += 1
            continue
        if err > 1.0:
            h = h_try * max(0.2, 0.9 * err ** -0.2)
            n_rejected += 1
            continue

        t_new = t_end if last else t + h_try
        stop = nxt
        while stop < ts.size and ts[stop] <= t_new:
            stop += 1
        if stop > nxt:
            theta = (ts[nxt:stop] - t) / h_try
            powers = theta[:, None] ** np.arange(1, 5)
            weights = powers @ _DP_P.T  # (samples, 7)
            out[nxt:stop] = y + h_try * (weights @ K)
            if ts[stop - 1] == t_new:
                out[stop - 1] = y_new
            valid[nxt:stop] = True
            nxt = stop
        t, y, k1 = t_new, y_new, K[6]
        factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        h = h_try * factor
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > overflow:
            bad = ~np.all(np.isfinite(out), axis=1) | (np.max(np.abs(np.nan_to_num(out, nan=np.inf)), axis=1) > overflow)
            valid &= ~bad
            out[~valid] = np.nan
            traj = Trajectory(ts, out, valid, "rk45")
            traj.info.update(overflow_time=t, n_steps=n_steps, n_rejected=n_rejected)
            return traj

    out[-1] = y
    valid[-1] = True
    traj = Trajectory(ts, out, valid, "rk45")
    traj.info.update(n_steps=n_steps, n_rejected=n_rejected)
    return traj


def check_upper_triangular(A, rel=1e-15):
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("state matrix must be square")
    scale = np.max(np.abs(A)) if A.size else 0.0
    lower = np.tril(A, -1)
    if scale > 0 and np.max(np.abs(lower)) > rel * scale:
        raise NotUpperTriangular("state matrix has nonzero entries below the diagonal")
    return A


def _cheb_tables(n):
    theta = np.pi * (np.arange(n) + 0.5) / n
    x = np.cos(theta)
    # values -> coefficients for first-kind Chebyshev nodes
    fwd = (2.0 / n) * np.cos(np.outer(np.arange(n), theta))
    fwd[0] *= 0.5
    # coefficients (degree <= n) -> values at the nodes
    back = np.cos(np.outer(theta, np.arange(n + 1)))
    return x, fwd, back


def _phi_panel(A, b, y0, t0, t1, n):
    """Variation of constants on one panel; returns node data and coefficients."""
    D = A.shape[0]
    x, fwd, back = _cheb_tables(n)
    tau = (x + 1.0) * (0.5 * (t1 - t0))
    Y = np.empty((D, n), dtype=complex)
    for k in range(D - 1, -1, -1):
        mu = A[k, k]
        forcing = A[k, k + 1:] @ Y[k + 1:] + b[k]
        integrand = np.exp(-mu * tau) * forcing
        coef = fwd @ integrand
        anti = C.chebint(coef, lbnd=-1, scl=0.5 * (t1 - t0))
        Y[k] = np.exp(mu * tau) * (y0[k] + back[:, : anti.size] @ anti)
    coefs = Y @ fwd.T
    return coefs


def _converged(coefs, tol=1e-14):
    mag = np.abs(coefs)
    top = np.max(mag, axis=1)
    tail = np.max(mag[:, -4:], axis=1)
    return bool(np.all(tail <= tol * np.maximum(top, 1e-300) + 1e-300))


def _panel_width(A, span):
    rate = float(np.max(np.abs(np.diag(A)))) if A.size else 0.0
    if rate == 0.0:
        return span
    return min(span, 8.0 / rate)


def solve_upper_triangular_linear(A, b, y0, grid, max_degree=256):
    """
    Exact back-substitution for ``dy/dt = A y + b`` with upper-triangular ``A``.

    Components are solved from last to first. Component ``k`` obeys the
    scalar equation ``y_k' = A_kk y_k + f_k(t)`` with forcing ``f_k`` built
    from the already known components, and is obtained by variation of
    constants,

        y_k(t) = exp(A_kk t) (y_k(0) + int_0^t exp(-A_kk s) f_k(s) ds).

    Every component is an exponential polynomial, so on each time panel it is
    carried by a Chebyshev interpolant whose degree is raised until the
    trailing coefficients sit at rounding level; the integral above is then
    the exact antiderivative of that interpolant.

    Parameters
    ----------
    A : (N, N) array_like
        Upper-triangular complex state matrix.
    b : (N,) array_like
        Constant affine term.
    y0 : (N,) array_like
        Initial state at ``grid.t0``.
    grid : TimeGrid

    Returns
    -------
    Trajectory

    Raises
    ------
    NotUpperTriangular
        If any subdiagonal entry exceeds ``1e-15`` times ``max|A|``.
    """
    A = check_upper_triangular(A)
    D = A.shape[0]
    b = np.broadcast_to(np.asarray(b, dtype=complex), (D,))
    state = np.array(y0, dtype=complex).reshape(D)
    ts = grid.samples
    out = np.empty((ts.size, D), dtype=complex)
    out[0] = state

    width = _panel_width(A, grid.t1 - grid.t0)
    edges = np.arange(grid.t0, grid.t1, width)
    edges = list(np.append(edges, grid.t1))
    if edges[-1] - edges[-2] < 1e-12 * width and len(edges) > 2:
        edges.pop(-2)
    stack = list(zip(edges[:-1], edges[1:]))[::-1]
    degrees = []

    while stack:
        a, c = stack.pop()
        n = 32
        while True:
            coefs = _phi_panel(A, b, state, a, c, n)
            if _converged(coefs) or n >= max_degree:
                break
            n *= 2
        if not _converged(coefs) and (c - a) > 1e-9 * (grid.t1 - grid.t0):
            mid = 0.5 * (a + c)
            stack.append((mid, c))
            stack.append((a, mid))
            continue
        degrees.append(n)
        mask = (ts > a) & (ts <= c)
        if np.any(mask):
            xq = 2.0 * (ts[mask] - a) / (c - a) - 1.0
            out[mask] = C.chebvander(xq, coefs.shape[1] - 1) @ coefs.T
        state = coefs.sum(axis=1)  # T_k(1) = 1
    if ts.size > 1:
        # the final sample lies on the last panel edge; use the propagated state
        out[-1] = state
    # rows with no coupling and no forcing are constant; keep them free of interpolation rounding
    frozen = ~np.any(A != 0, axis=1) & (b == 0)
    out[:, frozen] = np.asarray(y0, dtype=complex).reshape(D)[frozen]
    traj = Trajectory(ts, out, None, "triangular")
    traj.info["degrees"] = degrees
    return traj


def solve_linear_expm(A, b, y0, grid, overflow=OVERFLOW_GUARD):
    """
    ``dy/dt = A y + b`` on a uniform grid by repeated application of the
    one-step propagator ``expm(h [[A, b], [0, 0]])``.

    Samples after the state first exceeds ``overflow`` are marked invalid,
    matching :func:`rk45`.
    """
    A = np.asarray(A, dtype=complex)
    D = A.shape[0]
    aug = np.zeros((D + 1, D + 1), dtype=complex)
    aug[:D, :D] = A
    aug[:D, D] = np.broadcast_to(np.asarray(b, dtype=complex), (D,))
    ts = grid.samples
    P = expm((ts[1] - ts[0]) * aug)
    out = np.empty((ts.size, D + 1), dtype=complex)
    out[0, :D] = np.asarray(y0, dtype=complex).reshape(D)
    out[0, D] = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, ts.size):
            out[j] = P @ out[j - 1]
        mag = np.max(np.abs(out[:, :D]), axis=1)
    bad = np.flatnonzero(~np.isfinite(mag) | (mag > overflow))
    valid = np.ones(ts.size, dtype=bool)
    if bad.size:
        valid[bad[0]:] = False
    y = out[:, :D]
    y[~valid] = np.nan
    return Trajectory(ts, y, valid, "expm")
