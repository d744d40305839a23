"""Trigonometric-polynomial governing functions and their Maclaurin series."""

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class TrigPoly:
    """
    ``g(x) = sum_{m=-M}^{M} g_m exp(i m x)``.

    ``coeffs[m + M]`` holds ``g_m``; the array is read-only.
    """

    M: int
    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=complex).reshape(-1)
        if self.M < 0 or arr.size != 2 * self.M + 1:
            raise ValueError(f"expected {2 * self.M + 1} coefficients for M={self.M}")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def from_dict(cls, mapping):
        """Build from ``{m: g_m}``; ``M`` is the largest ``|m|``."""
        M = max((abs(int(m)) for m in mapping), default=0)
        arr = np.zeros(2 * M + 1, dtype=complex)
        for m, v in mapping.items():
            arr[int(m) + M] += complex(v)
        return cls(M, arr)

    @classmethod
    def case_study(cls, a, b=1.0):
        """``a (1 - b exp(ix))``; ``b = 1`` puts an equilibrium at the origin."""
        return cls(1, [0.0, complex(a), -complex(a) * complex(b)])

    def __getitem__(self, m):
        if abs(m) > self.M:
            return 0j
        return complex(self.coeffs[m + self.M])

    def __eq__(self, other):
        return isinstance(other, TrigPoly) and self.M == other.M and np.array_equal(
            self.coeffs, other.coeffs)

    def __hash__(self):
        return hash((self.M, self.coeffs.tobytes()))

    @property
    def frequencies(self):
        return np.arange(-self.M, self.M + 1)

    def __call__(self, x):
        return eval_trigpoly(self, x)

    def to_json(self):
        rows = [[int(m), float(c.real), float(c.imag)] for m, c in zip(self.frequencies, self.coeffs)]
        return {"M": int(self.M), "coeffs": rows}

    @classmethod
    def from_json(cls, data):
        """Parse ``{"M": int, "coeffs": [[m, re, im], ...]}`` (dict or string)."""
        if isinstance(data, str):
            data = json.loads(data)
        M = int(data["M"])
        arr = np.zeros(2 * M + 1, dtype=complex)
        for row in data["coeffs"]:
            m, re, im = row
            m = int(m)
            if abs(m) > M:
                raise ValueError(f"frequency {m} exceeds declared degree {M}")
            arr[m + M] = complex(float(re), float(im))
        return cls(M, arr)


def eval_trigpoly(g, x):
    """Evaluate ``g`` at scalar or array ``x``."""
    x = np.asarray(x, dtype=complex)
    out = np.zeros(x.shape, dtype=complex)
    for m, gm in zip(g.frequencies, g.coeffs):
        if gm != 0:
            out = out + gm * np.exp(1j * m * x)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class MaclaurinSeries:
    """Coefficients ``c_0, ..., c_{n_max}`` of ``g(x) = sum c_n x^n``."""

    n_max: int
    coeffs: np.ndarray

    def __getitem__(self, n):
        return complex(self.coeffs[n])

    def evaluate(self, x):
        x = np.asarray(x, dtype=complex)
        out = np.zeros(x.shape, dtype=complex)
        for c in self.coeffs[::-1]:
            out = out * x + c
        return complex(out) if out.ndim == 0 else out


def maclaurin(g, n_max):
    """
    Maclaurin coefficients ``c_n = sum_m g_m (i m)^n / n!`` for ``n <= n_max``.

    The factorial is folded into the running power so large orders never
    form ``n!`` explicitly.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    c = np.zeros(n_max + 1, dtype=complex)
    term = g.coeffs.astype(complex).copy()  # g_m (i m)^0 / 0!
    im = 1j * g.frequencies
    c[0] = term.sum()
    for n in range(1, n_max + 1):
        term = term * im / n
        c[n] = term.sum()
    coeffs = c
    coeffs.setflags(write=False)
    return MaclaurinSeries(n_max, coeffs)


def has_nonnegative_frequencies_only(g):
    """True iff every ``g_m`` with ``m < 0`` is exactly zero."""
    return bool(np.all(g.coeffs[: g.M] == 0))


def default_bound_constants(g, n_max=60):
    """
    Constants ``(C0, R0)`` with ``|c_n| <= C0 R0^(n-1) / n!`` for ``1 <= n <= n_max``.

    ``R0 = max(M, 1)`` and ``C0`` is the smallest constant that works over the
    computed range, i.e. ``max_n |sum_m g_m (i m)^n| / R0^(n-1)``.
    """
    R0 = float(max(g.M, 1))
    m = g.frequencies.astype(float)
    ratio = m / R0
    best = 0.0
    # |c_n| n! / R0^(n-1) = R0 |sum_m g_m (i m/R0)^n|
    power = np.ones_like(ratio, dtype=complex)
    for _ in range(1, n_max + 1):
        power = power * (1j * ratio)
        best = max(best, R0 * abs(np.sum(g.coeffs * power)))
    return best, R0
