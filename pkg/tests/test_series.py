from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vel import series as S


def taylor(fn_derivs, order):
    return np.array([d / math.factorial(n) for n, d in enumerate(fn_derivs[: order + 1])])


def test_variable_and_derivative():
    t = S.Series.variable(0.3, 4)
    np.testing.assert_allclose(t.c, [0.3, 1, 0, 0, 0])
    np.testing.assert_allclose((t * t).derivative().c, [0.6, 2, 0, 0])


@given(t0=st.floats(-2, 2))
def test_elementary_functions(t0):
    t = S.Series.variable(t0, 5)
    e = math.exp(t0)
    np.testing.assert_allclose(t.exp().c, taylor([e] * 6, 5), rtol=1e-13)
    s, c = math.sin(t0), math.cos(t0)
    np.testing.assert_allclose(t.sin().c, taylor([s, c, -s, -c, s, c], 5), atol=1e-14)
    np.testing.assert_allclose(t.cos().c, taylor([c, -s, -c, s, c, -s], 5), atol=1e-14)


@given(t0=st.floats(0.5, 3))
def test_inverse_pairs(t0):
    t = S.Series.variable(t0, 6)
    np.testing.assert_allclose(t.log().exp().c, t.c, atol=1e-12)
    np.testing.assert_allclose((t.sqrt() * t.sqrt()).c, t.c, atol=1e-12)
    np.testing.assert_allclose((t * t.reciprocal()).c, [1, 0, 0, 0, 0, 0, 0], atol=1e-12)
    np.testing.assert_allclose((t ** 1.5).c, (t * t.sqrt()).c, atol=1e-12)


def test_recurse_solves_linear_ode():
    # q' = -2 q  ->  q = exp(-2 t)
    qs = S.recurse([np.array(1.0)], lambda q: [-2.0 * q[0]], 6)
    np.testing.assert_allclose(qs[0].c, [(-2.0) ** n / math.factorial(n) for n in range(7)], rtol=1e-14)


def test_taylor_derivative():
    t = S.Series.variable(0.0, 5).sin()
    assert t.taylor_derivative(3) == pytest.approx(-1.0)


def test_constants_mix_in():
    t = S.Series.variable(1.0, 2)
    np.testing.assert_allclose((2.0 - t).c, [1, -1, 0])
    np.testing.assert_allclose((1.0 / t).c, [1, -1, 1])
    assert np.all(S.derivative(np.ones(3)) == 0)
