import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carleman_lift import carleman_fourier as cf
from carleman_lift.casestudy import CaseParams, exact_solution
from carleman_lift.errors import (AssumptionViolated, BranchJump, GateFailed, InitialOutOfStrip,
                                  NegativeFrequencyPresent, OutOfTimeRange)
from carleman_lift.numerics import TimeGrid
from carleman_lift.trigpoly import TrigPoly


def _random_g(rng, M, nonneg=False):
    d = {m: complex(*rng.normal(size=2)) for m in range(-M, M + 1)}
    if nonneg:
        d = {m: v for m, v in d.items() if m >= 0}
        d[-M] = 0.0
    return TrigPoly.from_dict(d)


def test_indices_and_offsets():
    idx = cf.multi_indices(3)
    assert idx[:5] == ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    for N in range(1, 16):
        assert len(cf.multi_indices(N)) == cf.cf_dimension(N) == N * (N + 3) // 2
        for k in range(1, N + 1):
            assert cf.multi_indices(N)[cf.block_offset(k)] == (k, 0)


def test_h_coefficient():
    g = TrigPoly.from_dict({-2: 5.0, -1: 4.0, 0: 1.0, 1: 2.0, 2: 3.0})
    assert cf.h_coefficient(g, (0, 0)) == 1.0
    assert cf.h_coefficient(g, (2, 0)) == 3.0
    assert cf.h_coefficient(g, (0, 1)) == 4.0
    assert cf.h_coefficient(g, (0, 2)) == 5.0
    for gamma in ((1, 1), (3, 0), (0, 3), (-1, 0), (2, -1)):
        assert cf.h_coefficient(g, gamma) == 0


def test_section_reproduces_infinite_system(rng):
    # rows of order k <= N - M see every coupling, so B Y(x) = i (a1 - a2) g(x) Y(x) exactly
    for M, N in ((1, 5), (2, 7), (3, 9)):
        g = _random_g(rng, M)
        sec = cf.build_cf_section(g, N)
        x = complex(*rng.normal(size=2) * 0.3)
        Y = cf.cf_initial_state(x, N)
        lhs = sec.matrix @ Y
        d = np.array([a1 - a2 for a1, a2 in sec.indices])
        rhs = 1j * d * g(x) * Y
        full = np.array([a1 + a2 <= N - M for a1, a2 in sec.indices])
        assert np.allclose(lhs[full], rhs[full], atol=1e-12)


def test_block_structure(rng):
    g = _random_g(rng, 2)
    sec = cf.build_cf_section(g, 6)
    for k in range(1, 7):
        for l in range(1, 7):
            blk = sec.block(k, l)
            assert blk.shape == (k + 1, l + 1)
            if l < k or l - k > 2:
                assert np.all(blk == 0)
    assert sec.position((2, 1)) == cf.block_offset(3) + 1


def test_zero_rows_constant(rng):
    g = _random_g(rng, 1)
    sec = cf.build_cf_section(g, 6)
    tr = cf.solve_cf_section(sec, 0.3 + 0.2j, TimeGrid(0.0, 0.4, 10))
    for r, (a1, a2) in enumerate(sec.indices):
        if a1 == a2:
            assert np.all(sec.matrix[r] == 0)
            assert np.all(tr.component(r) == 1.0)


def test_n1_n2_closed_forms(rng):
    g = _random_g(rng, 1)
    g0, g1, gm = g[0], g[1], g[-1]
    x0 = 0.4 - 0.3j
    grid = TimeGrid(0.0, 0.7, 20)
    t = grid.samples
    y1 = cf.solve_cf_section(cf.build_cf_section(g, 1), x0, grid)
    assert np.allclose(y1.component(0), np.exp(1j * (x0 + g0 * t)), atol=1e-13)
    assert np.allclose(y1.component(1), np.exp(-1j * (x0 + g0 * t)), atol=1e-13)
    y2 = cf.solve_cf_section(cf.build_cf_section(g, 2), x0, grid)
    plus = (g1 * np.exp(1j * (2 * x0 + g0 * t)) + gm) * np.expm1(1j * g0 * t) / g0 + np.exp(1j * (x0 + g0 * t))
    minus = (gm * np.exp(-1j * (2 * x0 + g0 * t)) + g1) * np.expm1(-1j * g0 * t) / g0 + np.exp(-1j * (x0 + g0 * t))
    assert np.allclose(y2.component(0), plus, atol=1e-12)
    assert np.allclose(y2.component(1), minus, atol=1e-12)


def test_exact_and_rk45_agree(rng):
    g = _random_g(rng, 2)
    sec = cf.build_cf_section(g, 5)
    grid = TimeGrid(0.0, 0.3, 12)
    a = cf.solve_cf_section(sec, 0.1 + 0.1j, grid)
    b = cf.solve_cf_section(sec, 0.1 + 0.1j, grid, method="rk45")
    assert np.max(np.abs(a.y - b.y)) < 1e-9 * max(1.0, np.max(np.abs(a.y)))
    with pytest.raises(ValueError):
        cf.solve_cf_section(sec, 0.0, grid, method="euler")


def test_concise_matches_full_section(rng):
    g = _random_g(rng, 2, nonneg=True)
    N = 6
    full = cf.solve_cf_section(cf.build_cf_section(g, N), 0.2 + 0.3j, TimeGrid(0.0, 0.5, 16))
    conc = cf.solve_concise_cf(cf.build_concise_cf(g, N), 0.2 + 0.3j, TimeGrid(0.0, 0.5, 16))
    sec = cf.build_cf_section(g, N)
    for k in range(1, N + 1):
        assert np.allclose(full.component(sec.position((k, 0))), conc.component(k - 1), atol=1e-11)


def test_concise_structure():
    for N in range(1, 16):
        G = cf.build_concise_cf(TrigPoly.case_study(1j), N).G
        assert np.all(np.triu(G, 2) == 0) and np.all(np.tril(G, -1) == 0)
        assert np.allclose(np.diag(G), 1j * np.arange(1, N + 1) * 1j)
    with pytest.raises(NegativeFrequencyPresent):
        cf.build_concise_cf(TrigPoly.from_dict({-1: 0.1, 0: 1.0}), 3)


def test_case_study_time_range():
    for im in (0.0, 2.0, -1.3):
        rep = cf.case_study_bound_report(complex(0.7, im))
        assert rep.R == pytest.approx(math.exp(abs(im) + 2))
        assert rep.T_cf_star == pytest.approx((math.e - 1) / (2 * math.e - 1) * math.exp(-abs(im) - 2))


def test_bound_report_checks():
    g = TrigPoly.case_study(1.0)
    with pytest.raises(InitialOutOfStrip):
        cf.cf_bound_report(g, 3j, 5.0)
    with pytest.raises(ValueError):
        cf.cf_bound_report(g, 0.0, 2.0)
    rep = cf.cf_bound_report(g, 0.5j, 10.0)
    assert rep.D0 == cf.D0_theorem(g, 10.0) == pytest.approx(2 * 10.0)
    with pytest.raises(OutOfTimeRange):
        rep.bound(3, rep.T_cf_star * 1.1)
    assert cf.D0_remark(g, 10.0) == pytest.approx(10.0)


def test_bound_formula_at_zero():
    x0, R = 0.5j, math.exp(2.5)
    rep = cf.case_study_bound_report(x0, R)
    N = 4
    expected = rep.C0 * N ** -1.5 * math.exp((math.e - 1) * N / (2 * math.e - 1) * (0.5 + 1 - math.log(R)))
    assert rep.bound(N, 0.0) == pytest.approx(expected, rel=1e-12)
    assert cf.cf_bound(None, x0, R, N, 0.0, D0=R) == pytest.approx(expected, rel=1e-12)


def test_global_rate_clauses():
    with pytest.raises(AssumptionViolated) as e:
        cf.global_rate(TrigPoly.from_dict({-1: 1.0, 0: 1j}), 0.0, 10.0)
    assert e.value.clause == "nonnegative"
    with pytest.raises(AssumptionViolated) as e:
        cf.global_rate(TrigPoly.case_study(1.0), 0.0, 10.0)
    assert e.value.clause == "mu0"
    g = TrigPoly.case_study(1j)
    with pytest.raises(AssumptionViolated) as e:
        cf.global_rate(g, 2j, 5.0)
    assert e.value.clause == "R"
    with pytest.raises(AssumptionViolated) as e:
        cf.global_rate(g, -0.5j, 5.0)
    assert e.value.clause == "initial"
    gr = cf.global_rate(g, 3j, 60.0)
    norm = math.hypot(math.exp(-3), math.exp(3))
    assert gr.D0 == pytest.approx(60.0)
    assert gr.rate == pytest.approx(61.0 * norm / 60.0)
    assert not gr.converges


def test_recover_state_unwraps():
    p = CaseParams(1.0, -1.5)  # diverges: Re x grows by 2 pi per period
    t = np.linspace(0, 2 * math.pi, 400)
    x = exact_solution(p, t)
    xi = cf.recover_state(np.exp(1j * x), p.x0, times=t, reference=x)
    assert np.allclose(xi.component(0), x, atol=1e-9)
    xm = cf.recover_state(np.exp(-1j * x), p.x0, sign=-1, times=t)
    assert np.allclose(xm.component(0), -x, atol=1e-9)


def test_recover_state_gates():
    y = np.exp(1j * np.array([0.0, 0.1, 0.2]))
    with pytest.raises(GateFailed):
        cf.recover_state(y, 0.0, reference=np.array([0.0, 0.1, 1.5]))
    with pytest.raises(GateFailed):
        cf.recover_state(y, 0.0, gate_bound=0.7)
    with pytest.raises(BranchJump):
        cf.recover_state(np.array([1.0, math.exp(-4.0)]), 0.0)


@settings(max_examples=20, deadline=None)
@given(re=st.floats(-3, 3), im=st.floats(-1, 1), N=st.integers(1, 8))
def test_dimension_and_initial_state_property(re, im, N):
    y = cf.cf_initial_state(complex(re, im), N)
    assert y.size == cf.cf_dimension(N)
    for r, (a1, a2) in enumerate(cf.multi_indices(N)):
        assert y[r] == pytest.approx(np.exp(1j * (a1 - a2) * complex(re, im)))


def test_concise_geometric_partial_sum():
    a, x0, t, N = 1.0, 0.3 + 0.2j, 0.4, 4
    z = cf.solve_concise_cf(cf.build_concise_cf(TrigPoly.case_study(a), N), x0, TimeGrid(0.0, t, 4))
    r = -np.exp(1j * x0) * np.expm1(1j * a * t)
    expected = np.exp(1j * (a * t + x0)) * sum(r ** l for l in range(N))
    assert z.component(0)[-1] == pytest.approx(expected, abs=1e-13)


def test_log_estimate_in_gated_region(rng):
    # |exp(iz) - 1| <= eps <= 1/2 implies |z mod 2 pi| <= 4 eps
    checked = 0
    while checked < 1000:
        z = complex(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)) + 2 * math.pi * rng.integers(-3, 4)
        eps = abs(np.exp(1j * z) - 1)
        if eps > 0.5:
            continue
        zr = complex((z.real + math.pi) % (2 * math.pi) - math.pi, z.imag)
        assert abs(zr) <= 4 * eps
        checked += 1


def test_recovered_state_within_four_epsilon():
    p = CaseParams(1.0, -0.5)
    N = 12
    grid = TimeGrid(0.0, 0.3, 60)
    z = cf.solve_concise_cf(cf.build_concise_cf(TrigPoly.case_study(1.0), N), p.x0, grid)
    x = exact_solution(p, grid.samples)
    xi = cf.recover_state(z, p.x0, reference=x)
    from carleman_lift.casestudy import exact_error
    assert np.all(np.abs(xi.component(0) - x) <= 4 * exact_error(p, N, grid.samples) + 1e-14)


def test_recover_exact_exponential():
    t = np.linspace(0, 2, 30)
    g0, x0 = 0.7, 0.2 + 0.1j
    xi = cf.recover_state(np.exp(1j * (x0 + g0 * t)), x0, times=t)
    assert np.allclose(xi.component(0), x0 + g0 * t, atol=1e-14)


def test_global_rate_documented_example():
    R = math.exp(5)
    gr = cf.global_rate(TrigPoly.case_study(1j), 3j, R)
    expected = (R + 1) * math.sqrt(math.exp(-6) + math.exp(6)) / R
    assert gr.D0 == pytest.approx(R) and gr.rate == pytest.approx(expected)
    assert gr.converges == (expected < 1)


def test_global_rate_scales_inversely_with_R():
    g = TrigPoly.from_dict({0: 2j})
    r1 = cf.global_rate(g, 0.5j, 10.0).rate
    r2 = cf.global_rate(g, 0.5j, 20.0).rate
    assert r1 == pytest.approx(2 * r2)


def test_real_shift_invariance_of_solved_error():
    grid = TimeGrid(0.0, 0.4, 20)
    g = TrigPoly.case_study(1j)
    errs = []
    for re in (-1.0, 0.0, 2.5):
        p = CaseParams(1j, complex(re, 0.4))
        z = cf.solve_concise_cf(cf.build_concise_cf(g, 8), p.x0, grid).component(0)
        from carleman_lift.casestudy import exp_neg_ix
        errs.append(np.abs(z * exp_neg_ix(p, grid.samples) - 1))
    assert np.allclose(errs[0], errs[1], rtol=1e-8) and np.allclose(errs[1], errs[2], rtol=1e-8)
