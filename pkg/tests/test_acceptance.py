"""
Acceptance criteria, one test each, at the stated tolerances and runtime
budgets. Every test prints a ``PASS``/``FAIL`` line; the lines are repeated
in the pytest terminal summary. Run this file directly to print them
without pytest.
"""

import math
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from carleman_lift import carleman_fourier as cf
from carleman_lift import experiments as ex
from carleman_lift.carleman import (build_carleman_section, carleman_bound, carleman_time_range,
                                    solve_finite_section)
from carleman_lift.casestudy import (CaseParams, TrajectoryKind, actual_time_range,
                                     cf_guaranteed_time_range, classify_trajectory, detect_blowup,
                                     exact_error, exact_solution, exact_z, exp_neg_ix)
from carleman_lift.numerics import TimeGrid
from carleman_lift.trigpoly import TrigPoly, maclaurin

A_VALUES = (1.0, 1j, -1j)


def _line(k, ok, detail, seconds):
    return f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail} [{seconds:.2f} s]"


def criterion_1():
    v0, v2 = cf_guaranteed_time_range(0.0), cf_guaranteed_time_range(2.0)
    ok = abs(v0 - 0.0524) <= 5e-4 and abs(v2 - 0.0071) <= 5e-4
    return ok, f"T*_CF(0) = {v0:.6f}, T*_CF(2) = {v2:.6f}", None


def criterion_2():
    t0 = actual_time_range(0.0, 0.0)
    t2 = actual_time_range(0.0, 2.0)
    ok = abs(t0 - math.pi / 3) <= 1e-9 and t2 == math.inf
    return ok, f"|T*(0,0) - pi/3| = {abs(t0 - math.pi / 3):.2e}, T*(0,2) = {t2}", 1.0


def criterion_3():
    grid = TimeGrid.with_points(0.5, 100)
    worst = 0.0
    for a in A_VALUES:
        g = TrigPoly.case_study(a)
        for x0 in (0.5 + 0.5j, -1 + 0.2j):
            p = CaseParams(a, x0)
            for N in range(1, 13):
                z = cf.solve_concise_cf(cf.build_concise_cf(g, N), x0, grid)
                for k in range(1, N + 1):
                    ref = exact_z(p, k, N, grid.samples)
                    rel = np.max(np.abs(z.component(k - 1) - ref)) / np.max(np.abs(ref))
                    worst = max(worst, rel)
    return worst <= 1e-8, f"worst relative deviation {worst:.2e} (tol 1e-8)", 5.0


def criterion_4():
    rng = np.random.default_rng(4)
    grid = TimeGrid.with_points(1.0, 50)
    t = grid.samples
    worst = 0.0
    for _ in range(3):
        c = rng.normal(size=(3, 2)) @ np.array([1, 1j])
        g = TrigPoly(1, c)
        g0, g1, gm = g[0], g[1], g[-1]
        assert g0 != 0
        x0 = complex(*rng.uniform(-1, 1, size=2))
        y1 = cf.solve_cf_section(cf.build_cf_section(g, 1), x0, grid)
        y2 = cf.solve_cf_section(cf.build_cf_section(g, 2), x0, grid)
        e = np.exp(1j * (x0 + g0 * t))
        plus = (g1 * np.exp(1j * (2 * x0 + g0 * t)) + gm) * np.expm1(1j * g0 * t) / g0 + e
        minus = (gm * np.exp(-1j * (2 * x0 + g0 * t)) + g1) * np.expm1(-1j * g0 * t) / g0 + 1 / e
        for got, ref in ((y1.component(0), e), (y1.component(1), 1 / e),
                         (y2.component(0), plus), (y2.component(1), minus)):
            worst = max(worst, np.max(np.abs(got - ref)))
    return worst <= 1e-9, f"worst deviation from N=1,2 closed forms {worst:.2e} (tol 1e-9)", 1.0


def criterion_5():
    rng = np.random.default_rng(5)
    worst = 0.0
    count = 0
    while count < 50:
        phi = rng.uniform(-math.pi / 2, math.pi / 2)
        x0 = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
        p = CaseParams.from_phi(phi, x0)
        t0 = detect_blowup(p, 0.6)
        t_max = 0.5 if t0 is None else min(0.5, 0.9 * t0)
        t = rng.uniform(0.0, t_max)
        if t == 0.0:
            continue
        grid = TimeGrid(0.0, t, 8)
        N = int(rng.integers(1, 11))
        z = cf.solve_concise_cf(cf.build_concise_cf(TrigPoly.case_study(p.a), N), x0, grid)
        lhs = np.abs(z.component(0) * exp_neg_ix(p, grid.samples) - 1)
        rhs = exact_error(p, N, grid.samples)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, rhs))))
        count += 1
    return worst <= 1e-8, f"50 tuples, worst scaled deviation {worst:.2e} (tol 1e-8)", 5.0


def criterion_6():
    points = [0j] + [r * np.exp(1j * th) for r in (0.05, 0.1, 0.15, 0.2)
                     for th in np.linspace(0, 2 * math.pi, 12, endpoint=False)]
    violations = 0
    worst_ratio = 0.0
    checked = 0
    for a in A_VALUES:
        g = TrigPoly.case_study(a)
        c = maclaurin(g, 10)
        for x0 in points:
            T = carleman_time_range(1.0, 1.0, x0)
            grid = TimeGrid.with_points(T, 200)
            x = exact_solution(CaseParams(a, x0), grid.samples)
            for N in range(1, 11):
                tr = solve_finite_section(build_carleman_section(c, N), x0, grid)
                err = np.abs(tr.component(0) - x)
                bound = carleman_bound(1.0, 1.0, x0, N, grid.samples)
                violations += int(np.sum(err > bound))
                pos = bound > 0
                if np.any(pos):
                    worst_ratio = max(worst_ratio, float(np.max(err[pos] / bound[pos])))
                checked += err.size
    ok = violations == 0
    return ok, f"{violations} violations in {checked} samples, worst error/bound {worst_ratio:.3f}", 30.0


def criterion_7():
    violations = 0
    worst_ratio = 0.0
    checked = 0
    for a in A_VALUES:
        g = TrigPoly.case_study(a)
        for re in (-2.0, 0.0, 1.3):
            for im in np.linspace(-1, 1, 9):
                x0 = complex(re, im)
                rep = cf.case_study_bound_report(x0)
                grid = TimeGrid.with_points(rep.T_cf_star, 100)
                p = CaseParams(a, x0)
                e_neg = exp_neg_ix(p, grid.samples)
                for N in range(1, 11):
                    z = cf.solve_concise_cf(cf.build_concise_cf(g, N), x0, grid).component(0)
                    err = np.abs(z * e_neg - 1)
                    bound = rep.bound(N, grid.samples)
                    violations += int(np.sum(err > bound))
                    worst_ratio = max(worst_ratio, float(np.max(err / bound)))
                    checked += err.size
    ok = violations == 0
    return ok, f"{violations} violations in {checked} samples, worst error/bound {worst_ratio:.3f}", 30.0


def criterion_8():
    seed = 1j * np.log(1 - np.exp(1j * math.pi / 2))
    t0 = detect_blowup(CaseParams(1.0, seed), 3.0)
    conv = CaseParams(-1j, 1.5)
    cls = classify_trajectory(conv)
    ok = (t0 is not None and abs(t0 - math.pi / 2) <= 1e-6
          and detect_blowup(conv, 50.0) is None and cls.kind is TrajectoryKind.CONVERGES)
    return ok, f"t0 - pi/2 = {t0 - math.pi / 2:.2e}, a=-i x0=3/2 -> {cls}", 1.0


def criterion_9():
    spec = ex.GridSpec(nx=21, ny=21, T_star=0.5, N=10, scheme="cf", a=1.0)
    grid = ex.error_grid_cf(spec, workers=4)
    # compare where the solver value is resolved; cells far below the clamp floor are rounding-limited
    resolved = grid.raw >= ex.CLAMP_LO
    dev = float(np.max(np.abs(grid.raw[resolved] - grid.closed_form[resolved])))
    dev_stored = float(np.max(np.abs(grid.values - ex.clamp(grid.closed_form))))
    shift = float(np.max(np.ptp(grid.values, axis=1)))
    ok = dev <= 0.02 and dev_stored <= 0.02 and shift <= 1e-6
    return ok, (f"solver vs closed form {dev:.2e} log10 units (stored {dev_stored:.2e}), "
                f"Re x0 spread {shift:.1e}"), 60.0


def criterion_10():
    problems = []
    rng = np.random.default_rng(10)
    for N in range(1, 16):
        g = TrigPoly(1, rng.normal(size=3) + 1j * rng.normal(size=3))
        sec = cf.build_cf_section(g, N)
        if sec.dimension != N * (N + 3) // 2:
            problems.append(f"dimension N={N}")
        tr = cf.solve_cf_section(sec, 0.3 + 0.1j, TimeGrid(0.0, 0.3, 6))
        for r, (a1, a2) in enumerate(sec.indices):
            if a1 == a2 and not (np.all(sec.matrix[r] == 0) and np.all(tr.component(r) == tr.component(r)[0])):
                problems.append(f"zero row {(a1, a2)} N={N}")
        for a in A_VALUES:
            G = cf.build_concise_cf(TrigPoly.case_study(a), N).G
            if np.any(np.triu(G, 2)) or np.any(np.tril(G, -1)) or not np.all(np.diag(G)):
                problems.append(f"concise not bidiagonal N={N}")
        for b in (1.0, 4 / 3):
            A = build_carleman_section(maclaurin(TrigPoly.case_study(1j, b), N), N)
            c0_zero = A.a[0] == 0
            if A.is_upper_triangular != c0_zero and N > 1:
                problems.append(f"triangularity N={N} b={b}")
            if N > 1 and not np.all(np.tril(A.A, -1) == 0) == c0_zero:
                problems.append(f"Carleman structure N={N} b={b}")
    ok = not problems
    return ok, "all invariants hold for N <= 15" if ok else "; ".join(problems[:5]), 5.0


FIGURE_FILES = {
    "fig1": [f"fig1_{a}_N{N}{s}" for N in (1, 5, 10) for a in ("a-neg-i", "a1", "a-i")
             for s in (".csv", ".meta.json")],
    "fig2": [f"fig2_{b}_{a}{s}" for b in ("b2_3", "b4_3") for a in ("a-neg-i", "a1", "a-i")
             for s in (".csv", ".meta.json")],
    "fig3-left": ["fig3-left_h.csv", "fig3-left_h.meta.json"],
    "fig3-right": ["fig3-right_time_ranges.csv", "fig3-right_time_ranges.meta.json"],
    "fig4-top": [f"fig4-top_{T}{s}" for T in ("T2", "T1_2", "T1_4")
                 for s in (".csv", ".meta.json", "_level.csv")],
    "fig4-bottom": [f"fig4-bottom_{p}{s}" for p in ("phi-neg-pi_2", "phi0", "phi-pi_2")
                    for s in (".csv", ".meta.json")],
    "fig5": [f"fig5_{a}_{k}.csv" for a in ("a1", "a-i", "a-neg-i") for k in ("field", "trajectories")],
}


def _check_figure_dir(fig_id, d, res, problems):
    names = sorted(p.name for p in d.iterdir())
    if names != sorted(FIGURE_FILES[fig_id]):
        problems.append(f"{fig_id}: file set {names}")
        return
    for name in names:
        if not name.endswith(".csv") or name.endswith("_level.csv"):
            continue
        data = np.genfromtxt(d / name, delimiter=",", skip_header=1, dtype=float)
        if fig_id in ("fig1", "fig2", "fig4-top", "fig4-bottom"):
            if data.shape != (res * res, 5) or np.any(data[:, 2] < -5) or np.any(data[:, 2] > 2):
                problems.append(f"{name}: shape {data.shape} or clamp")
        elif fig_id == "fig3-left":
            if data.shape != (res * res, 3) or np.any(data[:, 2] > 10) or np.any(data[:, 2] < 0):
                problems.append(f"{name}: shape or clamp")
        elif fig_id == "fig3-right":
            if data.shape != (res, 5) or np.any(data[:, 1:3] > 3):
                problems.append(f"{name}: shape or clamp")
        elif name.endswith("_field.csv") and data.shape != (res * res, 4):
            problems.append(f"{name}: shape {data.shape}")


def criterion_11():
    problems = []
    with tempfile.TemporaryDirectory() as tmp:
        for fig_id in ex.FIGURE_IDS:
            d1, d2 = Path(tmp, fig_id, "run1"), Path(tmp, fig_id, "run2")
            ex.reproduce_figure(fig_id, d1)
            ex.reproduce_figure(fig_id, d2)
            _check_figure_dir(fig_id, d1, ex.DEFAULT_RESOLUTION[fig_id], problems)
            for p in d1.iterdir():
                if p.read_bytes() != (d2 / p.name).read_bytes():
                    problems.append(f"{fig_id}: {p.name} differs between runs")
    ok = not problems
    return ok, (f"all {len(ex.FIGURE_IDS)} figure file sets present, shaped, clamped and byte-identical "
                "at default resolution" if ok else "; ".join(problems[:5])), 180.0


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


def evaluate(k):
    start = time.perf_counter()
    ok, detail, budget = CRITERIA[k - 1]()
    elapsed = time.perf_counter() - start
    if budget is not None and elapsed > budget:
        ok = False
        detail += f"; runtime over budget of {budget:.0f} s"
    return ok, _line(k, ok, detail, elapsed)


@pytest.mark.parametrize("k", range(1, len(CRITERIA) + 1))
def test_acceptance(k, record):
    ok, line = evaluate(k)
    record(line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(k) for k in range(1, len(CRITERIA) + 1)]
    for _, line in results:
        print(line)
    raise SystemExit(0 if all(ok for ok, _ in results) else 1)
