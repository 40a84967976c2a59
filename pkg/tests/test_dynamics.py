from __future__ import annotations

import numpy as np
import pytest
import sympy as sp

from vel import dynamics as D
from vel import series as S
from vel.errors import BoundaryVelocityNonzero, CflViolated, DegenerateA1, MissingTimeDerivative, SeriesTooShort
from vel.grid_norms import Grid
from vel.thermo import GasParams, gamma_of_entropy
from vel.verify import elimination_oracle_gap, perfect_derivative_error
from vel.vorticity import smooth_torus_state

P = GasParams(5 / 3)
P2 = GasParams(2.0)


def _vals(tup):
    s, r, u = tup
    return [S.value(s), S.value(r), *(S.value(c) for c in u)]


# ---------------------------------------------------------------- elimination
def test_constant_state_at_rest():
    g = Grid.periodic(16)
    one = np.ones(g.shape)
    out = _vals(D.nonlinear_time_derivatives(g, P, 0 * one, 0.1 * one, (0 * one,) * 3))
    assert all(np.max(np.abs(v)) < 1e-13 for v in out)
    assert np.all(D.a1_coefficient(0.1, 1.0, 0.5, 5 / 3) == 1.0)


def test_rest_frame_acceleration():
    g = Grid.interval(32, vacuum="both")
    x = g.coords[0]
    r = 0.3 * 4 * x * (1 - x)
    z = 0 * x
    st, rt, ut = D.nonlinear_time_derivatives(g, P2, z, r, (z, z, z))
    assert np.max(np.abs(rt)) == 0
    np.testing.assert_allclose(ut[0], -g.d(r, 1) / (0.5 + r), atol=1e-14)


def test_elimination_matches_linear_solve():
    a, b = elimination_oracle_gap(200, 1)
    assert a < 1e-12 and b < 1e-12


def test_degenerate_a1():
    g = Grid.periodic(16)
    one = np.ones(g.shape)
    # large r and fast flow make a_1 negative
    with pytest.raises(DegenerateA1):
        D.nonlinear_time_derivatives(g, GasParams(3.0), 0 * one, 50 * one, (30 * one, 0 * one, 0 * one))


def test_linearization_against_central_difference():
    g = Grid.torus(16, 16)
    st = smooth_torus_state(g, P)
    bg = D.background_series_from_state(st, P, 2).truncate(1)
    x, y = g.coords
    rng = np.random.default_rng(7)
    ph = rng.uniform(0, 2 * np.pi, 4)
    lin = D.LinearizedState(g, np.sin(2 * np.pi * x + ph[0]), 0.3 * np.cos(2 * np.pi * y + ph[1]),
                            np.stack([np.sin(2 * np.pi * (x + y) + ph[2]), np.cos(2 * np.pi * x + ph[3]), 0 * x]))
    got = _vals(D.linearized_time_derivatives(g, P, bg, lin.s, lin.r, tuple(lin.u)))
    e = 1e-6

    def N(c):
        return _vals(D.nonlinear_time_derivatives(g, P, st.s + c * lin.s, st.r + c * lin.r,
                                                  tuple(st.u[j] + c * lin.u[j] for j in range(3))))

    fd = [(a - b) / (2 * e) for a, b in zip(N(e), N(-e))]
    for a, b in zip(got, fd):
        assert np.max(np.abs(a - b)) < 1e-8 * max(1.0, np.max(np.abs(b)))


# ---------------------------------------------------------------- sources
def test_sources_vanish_on_constant_state():
    g = Grid.periodic(16)
    bg = D.constant_background(g, P).series(0.0, 1)
    rng = np.random.default_rng(0)
    f, gg, h = D.linearized_sources(g, P, bg, rng.normal(size=16), rng.normal(size=16), tuple(rng.normal(size=(3, 16))))
    for v in (f, gg, *h):
        assert np.max(np.abs(S.value(v))) < 1e-15


def test_sources_on_static_profile():
    g = Grid.interval(32, vacuum="both")
    ab = D.static_rest_background(g, P2)
    bg = ab.series(0.0, 1)
    z = np.zeros(g.shape)
    f, gg, h = D.linearized_sources(g, P2, bg, z, np.ones(g.shape), (z, z, z))
    r = S.value(bg.r)
    assert np.max(np.abs(S.value(f))) == 0 and np.max(np.abs(S.value(gg))) == 0
    np.testing.assert_allclose(S.value(h[1]), g.d(r, 1) / (0.5 + r) ** 2, atol=1e-14)
    assert np.max(np.abs(S.value(h[0]))) == 0


def test_sources_need_time_derivatives():
    g = Grid.periodic(16)
    bg = D.constant_background(g, P).series(0.0, 0)
    z = np.zeros(16)
    with pytest.raises(MissingTimeDerivative):
        D.linearized_sources(g, P, bg, z, z, (z, z, z))


def test_plane_wave_derivatives():
    g = Grid.periodic(128)
    x = g.coords[0]
    r0, a, k = 0.1, 0.7, 2 * np.pi
    bg = D.constant_background(g, P2, r0=r0).series(0.0, 1)
    z = 0 * x
    sd, rd, ud = D.linearized_time_derivatives(g, P2, bg, z, np.cos(k * x), (a * np.sin(k * x), z, z))
    np.testing.assert_allclose(S.value(rd), -(P2.gamma - 1) * r0 * a * k * np.cos(k * x), atol=1e-6)
    np.testing.assert_allclose(S.value(ud[0]), k * np.sin(k * x) / (0.5 + r0), atol=1e-5)
    z3 = D.linearized_time_derivatives(g, P2, bg, z, z, (z, z, z))
    assert all(np.max(np.abs(v)) == 0 for v in _vals(z3))


# ---------------------------------------------------------------- convective derivative
def test_entropy_is_transported():
    g = Grid.torus(16, 16)
    bg = D.background_series_from_state(smooth_torus_state(g, P), P, 2)
    assert np.max(np.abs(S.value(D.dt_apply(bg.s, bg)))) < 1e-13


def test_rest_frame_dt_is_time_derivative():
    g = Grid.interval(16, vacuum="both")
    bg = D.static_rest_background(g, P).series(0.0, 2)
    f = S.Series(np.random.default_rng(1).normal(size=(3,) + g.shape))
    np.testing.assert_allclose(D.dt_apply(f, bg).c, f.derivative().c)


def test_dt_apply_needs_series():
    g = Grid.periodic(16)
    bg = D.constant_background(g, P).series(0.0, 1)
    with pytest.raises(MissingTimeDerivative):
        D.dt_apply(np.ones(16), bg)


def test_forced_series_satisfy_sound_equation():
    g = Grid.interval(32, vacuum="both")
    ab = D.manufactured_1d_background(g, P)
    st = ab.state(0.0)
    F = ab.forcing_at(0.0)
    bg = D.background_series_from_state(st, P, 2, F)
    u = bg.u
    div = bg.u0.derivative() + g.d(u[0].truncate(1), 1)
    res = D.dt_apply(bg.r, bg) + (P.gamma - 1) * bg.r.truncate(1) * div - F.r
    assert np.max(np.abs(S.value(res))) < 1e-12


# ---------------------------------------------------------------- manufactured forcing
def test_constant_state_has_no_forcing():
    g = Grid.periodic(16)
    assert D.manufactured_forcing(D.constant_background(g, P)).is_zero()


def test_static_forcing_balances_pressure():
    g = Grid.interval(32, vacuum="both")
    ab = D.static_rest_background(g, P2)
    F = D.manufactured_forcing(ab)
    r_sym = ab.r_expr
    dr = sp.lambdify(D.X1, sp.diff(r_sym, D.X1))(g.coords[0])
    r = ab.state(0.0).r
    assert np.max(np.abs(F.s)) == 0 and np.max(np.abs(F.r)) == 0
    np.testing.assert_allclose(F.u[0], dr / (0.5 + r), atol=1e-14)


def test_forcing_requires_fixed_domain():
    g = Grid.interval(16, vacuum="both")
    ab = D.AnalyticBackground(g, P, sp.Integer(0), D.X1 * (1 - D.X1), (sp.Float(0.1), 0, 0))
    with pytest.raises(BoundaryVelocityNonzero):
        D.manufactured_forcing(ab)


def test_discrete_forcing_residual_fourth_order():
    errs = []
    for n in (32, 64, 128):
        ab = D.manufactured_1d_background(Grid.interval(n, vacuum="both"), P)
        errs.append(D.discrete_forcing_residual(ab, 0.3))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 3.5)


# ---------------------------------------------------------------- stepping
def test_zero_perturbation_stays_zero():
    g = Grid.interval(32, vacuum="both")
    ab = D.manufactured_1d_background(g, P)
    lin = D.LinearizedState.zeros(g)
    dt = D.stable_dt(ab.state(0.0), P, 0.4)
    for _ in range(5):
        lin = D.step_rk4(ab, lin, dt)
    assert max(np.max(np.abs(lin.s)), np.max(np.abs(lin.r)), np.max(np.abs(lin.u))) < 1e-13


def test_cfl_guard():
    g = Grid.interval(32, vacuum="both")
    ab = D.static_rest_background(g, P)
    with pytest.raises(CflViolated):
        D.step_rk4(ab, D.LinearizedState.zeros(g), 10.0)


def test_temporal_fourth_order():
    g = Grid.periodic(32)
    ab = D.constant_background(g, P2)
    x = g.coords[0]
    lin0 = D.LinearizedState(g, 0 * x, np.sin(2 * np.pi * x), np.stack([0.3 * np.cos(2 * np.pi * x), 0 * x, 0 * x]))

    def run(m):
        q = lin0
        for _ in range(m):
            q = D.step_rk4(ab, q, 0.2 / m)
        return q.r

    a, b, c = run(8), run(16), run(32)
    ratio = np.max(np.abs(a - b)) / np.max(np.abs(b - c))
    assert 12 < ratio < 20


# ---------------------------------------------------------------- energy identities
def test_moving_domain_check_static():
    times = np.linspace(0, 1, 7)
    assert D.moving_domain_ddt_check(times, np.ones(7), 0.0) < 1e-13
    with pytest.raises(SeriesTooShort):
        D.moving_domain_ddt_check(times[:4], np.ones(4), 0.0)


def test_perfect_derivative_converges():
    e1, e2 = perfect_derivative_error(32), perfect_derivative_error(64)
    assert np.log2(e1 / e2) > 3.5


def test_linearized_series_needs_background_order():
    g = Grid.periodic(16)
    bg = D.constant_background(g, P).series(0.0, 1)
    with pytest.raises(SeriesTooShort):
        D.linearized_series(bg, D.LinearizedState.zeros(g), 2)


def test_basic_estimate_coefficients_vanish_on_constant_state():
    g = Grid.periodic(16)
    c = D.basic_estimate_coefficients(D.constant_background(g, P).series(0.0, 1))
    assert c.C_Q < 1e-14 and c.kappa < 1e-14


def test_background_state_gamma():
    g = Grid.periodic(8)
    st = D.constant_background(g, P, r0=0.2).state(0.0)
    assert np.allclose(st.u0, 1.0) and np.allclose(gamma_of_entropy(st.s, P) + st.r, gamma_of_entropy(0.0, P) + 0.2)
