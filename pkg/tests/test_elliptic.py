from __future__ import annotations

import numpy as np
import pytest

from vel import dynamics as D
from vel import elliptic as EL
from vel import series as S
from vel.errors import FamilyTooSmall, GridDimTooLow, UnsupportedK, WrongFieldKind
from vel.grid_norms import Grid
from vel.thermo import GasParams, gamma_of_entropy
from vel.verify import decomposition_error, system6_error

P = GasParams(5 / 3)
P2 = GasParams(2.0)


def _rest_ramp(n=32):
    """r = x at rest with s = 0 on an interval with vacuum on the left."""
    g = Grid.interval(n, vacuum="left")
    x = g.coords[0]
    st = D.BackgroundState(g, 0 * x, x.copy(), np.zeros((3,) + g.shape))
    return g, x, D.background_series_from_state(st, P2, 1)


# ---------------------------------------------------------------- good operators
def test_L1_hand_examples():
    g, x, bg = _rest_ramp()
    K = gamma_of_entropy(0.0, P2) + x
    np.testing.assert_allclose(EL.L1_good(g, bg, x), 1 / K, atol=1e-12)
    np.testing.assert_allclose(EL.L1_good(g, bg, x**2), 4 * x / K, atol=1e-10)


def test_L1_extra_weight_term():
    g, x, bg = _rest_ramp()
    K = gamma_of_entropy(0.0, P2) + x
    # b adds b (g-1)/K dr dr~ = b/K for r~ = x
    np.testing.assert_allclose(EL.L1_good(g, bg, x, b=2.0) - EL.L1_good(g, bg, x), 2 / K, atol=1e-12)


def test_L1_rejects_bad_input():
    g, x, bg = _rest_ramp()
    with pytest.raises(ValueError):
        EL.L1_good(g, bg, x, b=-1.0)
    with pytest.raises(WrongFieldKind):
        EL.L1_good(g, bg, np.stack([x, x, x]))
    with pytest.raises(WrongFieldKind):
        EL.L2_good(g, bg, x)
    with pytest.raises(ValueError):
        EL.apply_elliptic("L9", g, bg, x)


def test_curl_needs_two_dimensions():
    g, x, bg = _rest_ramp()
    with pytest.raises(GridDimTooLow):
        EL.L3_good(g, bg, np.stack([x, 0 * x, 0 * x]))


def _slab_bg(n=16, t=0.0):
    g = Grid.slab(2 * n, n, 1.0, 1.0)
    return g, D.slab_2d_background(g, P).series(t, 2)


def _curl_of_gradient(n):
    g = Grid.slab(2 * n, n, 1.0, 1.0)
    bg = D.static_rest_background(g, P).series(0.0, 1)
    x1, x2 = g.coords
    a = 2 * np.pi * x1
    grad = np.stack([2 * np.pi * np.cos(a) * x2**3, 3 * np.sin(a) * x2**2, 0 * x1])
    return max(float(np.max(np.abs(c))) for c in EL.L3_good(g, bg, grad))


def test_curl_of_gradient_vanishes_at_rest():
    e1, e2 = _curl_of_gradient(16), _curl_of_gradient(32)
    assert np.log2(e1 / e2) > 3.0


@pytest.mark.parametrize("seed", range(3))
def test_div_curl_pairing_identity(seed):
    g, bg = _slab_bg()
    ut = EL.smooth_family(g, 1, seed, vector=True)[0]
    assert EL.div_curl_pairing_residual(g, bg, ut) < 1e-10


# ---------------------------------------------------------------- decomposition of L1
def _constant_decomposition(n):
    g = Grid.periodic(n)
    bg = D.constant_background(g, P).series(0.0, 4)
    x = g.coords[0]
    lin = D.LinearizedState(g, 0 * x, np.sin(2 * np.pi * x), np.stack([np.cos(2 * np.pi * x), 0 * x, 0 * x]))
    return float(np.max(np.abs(EL.decomposition_residual(g, bg, lin))))


def test_decomposition_vanishes_on_constant_state():
    # only stencil mismatch between composed and direct second derivatives survives
    e1, e2 = _constant_decomposition(32), _constant_decomposition(64)
    assert np.log2(e1 / e2) > 3.5


def test_decomposition_converges():
    e1, e2 = decomposition_error(8), decomposition_error(16)
    assert np.log2(e1 / e2) > 3.0


def test_printed_black_terms_do_not_close():
    g = Grid.slab(32, 16, 1.0, 1.0)
    bg = D.slab_2d_background(g, P).series(0.2, 4)
    x1, x2 = g.coords
    a = 2 * np.pi * x1
    lin = D.LinearizedState(g, 0.1 * np.cos(a) * x2, np.sin(a) * x2**2 + 0.3,
                            np.stack([np.cos(a) * x2, x2 * (1 - x2) * np.sin(a), 0 * x1]), 0.2)
    exact = np.max(np.abs(EL.decomposition_residual(g, bg, lin)))
    printed = np.max(np.abs(EL.decomposition_residual(g, bg, lin, printed=True)))
    assert printed > 1e3 * exact


def test_black_terms_are_subcritical():
    orders = EL.certify_black_terms(1)
    assert orders and all(v >= 0.5 for v in orders.values())


# ---------------------------------------------------------------- estimate fits
def test_family_validation():
    g, bg = _slab_bg(8)
    fam = EL.smooth_family(g, 49, 0)
    with pytest.raises(FamilyTooSmall):
        EL.estimate_constant_fit(EL.elliptic_r_sides, g, bg, fam)
    with pytest.raises(ValueError):
        EL.estimate_constant_fit(EL.elliptic_r_sides, g, bg, fam + [np.zeros(g.shape)])


def test_smooth_family_deterministic():
    g = Grid.slab(16, 8, 1.0, 1.0)
    a, b = EL.smooth_family(g, 5, 3), EL.smooth_family(g, 5, 3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_localization_constant_of_distance_profile():
    g = Grid.slab(16, 32, 1.0, 1.0)
    x2 = g.coords[1]
    r = np.minimum(x2, 1 - x2)
    assert EL.localization_constant(g, r) < 1e-10


# ---------------------------------------------------------------- higher sources
def test_higher_sources_level_zero_are_base_sources():
    g = Grid.interval(32, vacuum="both")
    ab = D.manufactured_1d_background(g, P)
    bg = ab.series(0.3, 3)
    x = g.coords[0]
    lin = D.LinearizedState(g, 0 * x, np.sin(2 * x), np.stack([np.cos(x), 0 * x, 0 * x]), 0.3)
    hs = EL.higher_sources(bg, lin, 0)
    ls = D.linearized_series(bg, lin, 1)
    _, gg, h = D.linearized_sources(g, P, bg.truncate(2), *ls[:2], ls[2])
    np.testing.assert_allclose(hs.B, S.value(gg), atol=1e-14)
    for a, b in zip(hs.C, h):
        np.testing.assert_allclose(a, S.value(b), atol=1e-14)


def test_higher_sources_reject_k2():
    g = Grid.periodic(16)
    bg = D.constant_background(g, P).series(0.0, 6)
    with pytest.raises(UnsupportedK):
        EL.higher_sources(bg, D.LinearizedState.zeros(g), 2)


def test_higher_sources_vanish_on_constant_state():
    g = Grid.periodic(32)
    bg = D.constant_background(g, P).series(0.0, 5)
    x = g.coords[0]
    lin = D.LinearizedState(g, 0 * x, np.sin(2 * np.pi * x), np.stack([np.cos(2 * np.pi * x), 0 * x, 0 * x]))
    hs = EL.higher_sources(bg, lin, 1)
    assert np.max(np.abs(S.value(hs.B))) < 1e-10
    assert max(np.max(np.abs(S.value(c))) for c in hs.C) < 1e-10


def test_differentiated_system_converges():
    e1, e2 = system6_error(32), system6_error(64)
    assert np.log2(e1 / e2) > 3.0


def test_printed_weights_do_not_converge():
    e1, e2 = system6_error(32, printed=True), system6_error(64, printed=True)
    assert e2 > 0.5 * e1 and e2 > 1e3 * system6_error(64)
