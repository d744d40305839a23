"""
Closed forms for ``dx/dt = a (1 - exp(ix))`` with ``|a| = 1``.

The exact solution is ``x(t) = a t + x0 + i ln w(t)`` with
``w(t) = 1 + (exp(iat) - 1) exp(ix0)``; it ceases to exist where ``w``
vanishes. Everything here is expressed through ``w`` so the branch of the
logarithm only matters when ``x`` itself is requested.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import comb

from .errors import BlowUpReached, Unclassified

SCAN_STEP = 1e-3
BLOWUP_TOL = 1e-10


@dataclass(frozen=True)
class CaseParams:
    a: complex
    x0: complex

    def __post_init__(self):
        a = complex(self.a)
        if abs(abs(a) - 1.0) > 1e-12:
            raise ValueError(f"|a| must be 1, got {abs(a):.15g}")
        if a.real < -1e-12:
            raise ValueError("a = exp(i phi) needs phi in [-pi/2, pi/2]")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "x0", complex(self.x0))

    @classmethod
    def from_phi(cls, phi, x0):
        return cls(complex(math.cos(phi), math.sin(phi)), x0)

    @property
    def phi(self):
        return math.atan2(self.a.imag, self.a.real)


def log_argument(p, t):
    """``w(t) = 1 + (exp(iat) - 1) exp(ix0)``."""
    t = np.asarray(t, dtype=float)
    return 1.0 + np.expm1(1j * p.a * t) * np.exp(1j * p.x0)


def exp_neg_ix(p, t):
    """``exp(-i x(t)) = exp(-i(at + x0)) w(t)``; branch free."""
    t = np.asarray(t, dtype=float)
    return np.exp(-1j * (p.a * t + p.x0)) * log_argument(p, t)


def detect_blowup(p, horizon):
    """
    Earliest ``t0`` in ``(0, horizon]`` with ``w(t0) = 0``, or None.

    ``|w|`` is scanned with step ``1e-3``; each local minimum is refined by
    bracketing the zero of ``d|w|^2/dt`` and accepted as a root when
    ``|w|`` there is below ``1e-10`` relative to its two terms.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    n = max(int(math.ceil(horizon / SCAN_STEP)), 2) + 1
    ts = np.linspace(0.0, horizon, n)
    mag = np.abs(log_argument(p, ts))
    q = np.exp(1j * p.x0)

    def slope(t):
        w = 1.0 + np.expm1(1j * p.a * t) * q
        dw = 1j * p.a * np.exp(1j * p.a * t) * q
        return float((np.conj(w) * dw).real)

    interior = np.flatnonzero((mag[1:-1] <= mag[:-2]) & (mag[1:-1] <= mag[2:])) + 1
    candidates = list(interior)
    if mag[-1] < mag[-2]:
        candidates.append(n - 1)
    for j in candidates:
        lo, hi = ts[max(j - 1, 0)], ts[min(j + 1, n - 1)]
        s_lo, s_hi = slope(lo), slope(hi)
        if s_lo == 0.0:
            t_star = lo
        elif s_hi == 0.0:
            t_star = hi
        elif s_lo < 0 < s_hi:
            t_star = brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        else:
            t_star = ts[j]
        scale = 1.0 + abs(np.exp(1j * p.a * t_star) * q) + abs(q)
        if t_star > 0 and abs(log_argument(p, t_star)) <= BLOWUP_TOL * scale:
            return float(t_star)
    return None


def _branch_tracked_log(p, t):
    t = np.asarray(t, dtype=float)
    tmax = float(np.max(t)) if t.size else 0.0
    n = max(int(math.ceil(tmax / SCAN_STEP)), 1) + 1
    dense = np.union1d(np.linspace(0.0, tmax, n), t.ravel())
    w = log_argument(p, dense)
    phase = np.unwrap(np.angle(w))
    logs = np.log(np.abs(w)) + 1j * phase
    return np.interp(t.ravel(), dense, logs.real).reshape(t.shape) + 1j * np.interp(
        t.ravel(), dense, logs.imag).reshape(t.shape)


def exact_solution(p, t):
    """
    ``x(t) = a t + x0 + i ln w(t)`` with the logarithm continued from ``w(0) = 1``.

    Raises
    ------
    BlowUpReached
        If ``w`` vanishes on ``[0, max t]``.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be nonnegative")
    if np.exp(1j * p.x0) == 1.0 or (p.x0.imag == 0 and math.remainder(p.x0.real, 2 * math.pi) == 0):
        # equilibrium: avoid rounding in the logarithm
        x = np.full(t_arr.shape, p.x0, dtype=complex)
        return complex(x) if x.ndim == 0 else x
    tmax = float(np.max(t_arr)) if t_arr.size else 0.0
    if tmax > 0:
        t0 = detect_blowup(p, tmax)
        if t0 is not None:
            raise BlowUpReached(f"solution blows up at t0 = {t0:.12g}", t0=t0)
    x = p.a * t_arr + p.x0 + 1j * _branch_tracked_log(p, t_arr)
    return complex(x) if x.ndim == 0 else x


class TrajectoryKind(str, Enum):
    BLOW_UP = "BlowUp"
    LIMIT_CYCLE = "LimitCycle"
    CONVERGES = "Converges"
    DIVERGES = "Diverges"
    EQUILIBRIUM = "Equilibrium"


@dataclass(frozen=True)
class TrajectoryClass:
    kind: TrajectoryKind
    t0: float = None

    def __str__(self):
        return self.kind.value if self.t0 is None else f"{self.kind.value}({self.t0:.12g})"


def blowup_search_horizon(p):
    """Window that must contain any blow-up time, or None if none can exist."""
    q = np.exp(1j * p.x0)
    rho = abs(1.0 - 1.0 / q)  # |exp(iat0)| at a root
    if rho == 0.0:
        return None
    s = p.a.imag
    if abs(s) < 1e-15:
        return 2 * math.pi if abs(rho - 1.0) < 1e-6 else None
    t_c = -math.log(rho) / s
    if t_c <= 0:
        return None
    return t_c + 1.0


def classify_trajectory(p):
    """
    Long-time behavior of the exact solution.

    Order of the rules: equilibrium (``x0`` in ``2 pi Z``), finite-time
    blow-up, then by ``Im a``. For ``a = 1`` the curve ``exp(-ix0) w(t)`` is
    the unit circle centered at ``exp(-ix0) - 1``; when it encloses the
    origin the logarithm gains ``2 pi i`` per period and cancels the drift
    (limit cycle), otherwise ``x(t) - t`` is periodic (divergence).

    Raises
    ------
    Unclassified
        If ``Im a = 0`` and ``|exp(-ix0) - 1| = 1`` within ``1e-12`` without
        a detected blow-up.
    """
    q = np.exp(1j * p.x0)
    if abs(q - 1.0) <= 1e-12:
        return TrajectoryClass(TrajectoryKind.EQUILIBRIUM)
    horizon = blowup_search_horizon(p)
    if horizon is not None:
        t0 = detect_blowup(p, horizon)
        if t0 is not None:
            return TrajectoryClass(TrajectoryKind.BLOW_UP, t0)
    s = p.a.imag
    if abs(s) < 1e-15:
        radius = abs(1.0 / q - 1.0)
        if abs(radius - 1.0) <= 1e-12:
            raise Unclassified("|exp(-ix0) - 1| = 1 lies on the boundary")
        kind = TrajectoryKind.LIMIT_CYCLE if radius < 1.0 else TrajectoryKind.DIVERGES
        return TrajectoryClass(kind)
    if s < 0:
        return TrajectoryClass(TrajectoryKind.CONVERGES)
    return TrajectoryClass(TrajectoryKind.DIVERGES)


def exact_z(p, k, N, t):
    """Closed form of ``z_{k,N}(t)`` for the bidiagonal concise section."""
    if not 1 <= k <= N:
        raise ValueError("need 1 <= k <= N")
    t = np.asarray(t, dtype=float)
    r = -np.exp(1j * p.x0) * np.expm1(1j * p.a * t)
    total = np.zeros(t.shape, dtype=complex)
    for l in range(N - k, -1, -1):  # Horner in r
        total = total * r + comb(k + l - 1, l, exact=True)
    out = np.exp(1j * k * (p.a * t + p.x0)) * total
    return complex(out) if out.ndim == 0 else out


def exact_error(p, N, t):
    """``|z_{1,N}(t) exp(-ix(t)) - 1| = |exp(ix0) (exp(iat) - 1)|^N``."""
    t = np.asarray(t, dtype=float)
    base = abs(np.exp(1j * p.x0)) * np.abs(np.expm1(1j * p.a * t))
    out = base ** N
    return float(out) if out.ndim == 0 else out


def h_phi(phi, t):
    """``|exp(iat) - 1|^2`` for ``a = exp(i phi)``."""
    t = np.asarray(t, dtype=float)
    s, c = math.sin(phi), math.cos(phi)
    out = np.exp(-2 * t * s) - 2 * np.exp(-t * s) * np.cos(t * c) + 1.0
    return float(out) if out.ndim == 0 else out


def max_h(phi, T):
    """``max_{0 <= t <= T} h(phi, t)``, scanned and then refined."""
    return max_h_window(phi, 0.0, T)


def _first_crossing(phi, thr, t_stop):
    chunk = 200_000
    start = 0.0
    while start < t_stop:
        stop = min(start + chunk * SCAN_STEP, t_stop)
        ts = np.arange(start, stop, SCAN_STEP)
        ts = np.append(ts, stop)
        hit = np.flatnonzero(h_phi(phi, ts) >= thr)
        if hit.size:
            j = int(hit[0])
            if j == 0:
                return float(ts[0])
            return brentq(lambda t: h_phi(phi, t) - thr, ts[j - 1], ts[j], xtol=1e-12)
        start = stop
    return None


def actual_time_range(phi, im_x0, t_cap=1e5):
    """
    Largest ``T`` with ``h(phi, t) < exp(2 Im x0)`` for all ``t < T``.

    Returns ``math.inf`` when the threshold is never reached.
    """
    thr = math.exp(2.0 * im_x0)
    if phi == 0.0:
        if im_x0 <= math.log(2.0):
            return 2.0 * math.asin(math.exp(im_x0) / 2.0)
        return math.inf
    s = math.sin(phi)
    if s > 0:
        if thr > 4.0:
            return math.inf
        # beyond t_stop, h stays within (1 +- exp(-t s))^2 of the threshold side
        if thr > 1.0:
            t_stop = -math.log(math.sqrt(thr) - 1.0) / s
        else:
            t_stop = 37.0 / s
        t_stop = min(t_stop, t_cap)
    else:
        t_stop = t_cap
    t = _first_crossing(phi, thr, t_stop)
    return math.inf if t is None else t


def cf_guaranteed_time_range(im_x0):
    """``(e-1)/(2e-1) exp(-|Im x0| - 2)``, independent of ``a`` and ``Re x0``."""
    e = math.e
    return (e - 1.0) / (2.0 * e - 1.0) * math.exp(-abs(im_x0) - 2.0)


def sup_h(phi, t_cap=1e5):
    """``sup_{t >= 0} h(phi, t)`` for ``phi`` in ``(0, pi/2]``."""
    s = math.sin(phi)
    if not s > 0:
        raise ValueError("phi must lie in (0, pi/2]")
    best = 1.0  # limit as t -> infinity
    start = 0.0
    span = max(10.0, 2 * math.pi / max(math.cos(phi), 1e-3))
    while start < t_cap:
        stop = start + span
        best = max(best, max_h_window(phi, start, stop))
        # tail envelope: h <= (1 + exp(-t s))^2
        if (1.0 + math.exp(-stop * s)) ** 2 <= best:
            break
        start = stop
    return best


def max_h_window(phi, t_lo, t_hi):
    n = max(int((t_hi - t_lo) / SCAN_STEP), 16) + 1
    ts = np.linspace(t_lo, t_hi, n)
    hs = h_phi(phi, ts)
    j = int(np.argmax(hs))
    best = float(hs[j])
    if 0 < j < n - 1:
        res = minimize_scalar(lambda t: -h_phi(phi, t), bounds=(ts[j - 1], ts[j + 1]),
                              method="bounded", options={"xatol": 1e-14})
        best = max(best, -float(res.fun))
    return best


def global_window_holds(phi, im_x0):
    """True iff ``Im x0 > (1/2) ln sup_t h(phi, t)`` (strict)."""
    return bool(im_x0 > 0.5 * math.log(sup_h(phi)))
