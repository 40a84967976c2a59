from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vel import thermo as th
from vel.errors import NegativeInput

P2 = th.GasParams(2.0)


def test_gamma_closed_form():
    assert th.gamma_of_entropy(0.0, P2) == pytest.approx(0.5, abs=1e-15)


def test_gamma_halves():
    s = 0.37
    assert th.gamma_of_entropy(s + 2 * np.log(2), P2) == pytest.approx(0.5 * th.gamma_of_entropy(s, P2), rel=1e-14)


@pytest.mark.parametrize("g", [1.4, 5 / 3, 2.0, 3.0])
def test_gamma_derivative_by_differences(g):
    p = th.GasParams(g)
    s, h = 0.2, 1e-5
    fd = (th.gamma_of_entropy(s + h, p) - th.gamma_of_entropy(s - h, p)) / (2 * h)
    assert fd == pytest.approx(th.dgamma_ds(s, p), rel=1e-9)
    assert th.dgamma_ds(s, p) == pytest.approx(-(g - 1) / g * th.gamma_of_entropy(s, p), rel=1e-15)


def test_point_from_pressure():
    pt = th.point_from_pr(0.01, 0.0, P2)
    for name, val in dict(r=0.1, eps=0.1, n=0.1, h=1.2).items():
        assert float(getattr(pt, name)) == pytest.approx(val, rel=1e-13)
    assert float(pt.n * pt.eps * (P2.gamma - 1)) == pytest.approx(0.01, rel=1e-13)


def test_vacuum_point():
    pt = th.point_from_pr(0.0, 0.0, P2, kind="r")
    assert float(pt.p) == float(pt.eps) == float(pt.n) == 0.0
    assert float(pt.h) == 1.0


def test_r_pressure_pair():
    assert float(th.point_from_pr(2.0, 0.0, P2, kind="r").p) == pytest.approx(4.0, rel=1e-15)
    assert float(th.point_from_pr(4.0, 0.0, P2).r) == pytest.approx(2.0, rel=1e-15)


def test_negative_input():
    with pytest.raises(NegativeInput):
        th.point_from_pr(-1.0, 0.0, P2)


def test_params_validation():
    with pytest.raises(ValueError):
        th.GasParams(1.0)


@given(g=st.floats(1.05, 3.0), s=st.floats(-2, 2), r=st.just(0.0) | st.floats(1e-6, 5.0))
def test_point_invariants(g, s, r):
    p = th.GasParams(g)
    pt = th.point_from_pr(r, s, p, kind="r")
    assert float(pt.h) == pytest.approx(float((pt.Gamma + pt.r) / pt.Gamma), rel=1e-12)
    assert float(pt.eps) == pytest.approx(float(pt.r / (g * pt.Gamma)), rel=1e-12)
    assert float(pt.p) == pytest.approx(float(pt.n * pt.eps * (g - 1)), rel=1e-12, abs=1e-300)
    back = th.point_from_pr(pt.p, s, p)
    assert float(back.r) == pytest.approx(r, rel=1e-13, abs=1e-300)


@given(g=st.floats(1.05, 3.0), s=st.floats(-2, 2), r=st.floats(1e-3, 5.0))
def test_entropy_inversion(g, s, r):
    p = th.GasParams(g)
    pt = th.point_from_pr(r, s, p, kind="r")
    assert th.entropy_from(pt.eps, pt.n, p) == pytest.approx(s, abs=1e-12)


def test_sound_speed_examples():
    assert th.sound_speed_sq(0.0, 0.0, P2) == 0.0
    assert th.sound_speed_sq(0.1, 0.0, P2) == pytest.approx(1 / 6, rel=1e-14)
    r = np.linspace(0, 3, 200)
    assert np.all(np.diff(th.sound_speed_sq(r, 0.3, P2)) > 0)


def test_boundary_weight_stays_positive():
    r = np.logspace(-12, -1, 20)
    assert np.all(th.gamma_of_entropy(0.4, P2) + r >= th.gamma_of_entropy(0.4, P2))
