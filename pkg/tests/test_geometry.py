from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from vel import geometry as geo
from vel.errors import ConstraintViolated, NonFinite

vel3 = arrays(np.float64, 3, elements=st.floats(-1.7, 1.7))


def test_complete_velocity_examples():
    assert geo.complete_velocity([0.0, 0.0, 0.0])[0] == 1.0
    assert geo.complete_velocity([0.6, 0.8, 0.0])[0] == pytest.approx(np.sqrt(2), abs=1e-15)
    assert geo.complete_velocity([1.0, 0.0, 0.0])[0] == pytest.approx(np.sqrt(2), abs=1e-15)


def test_complete_velocity_rejects_nonfinite():
    with pytest.raises(NonFinite):
        geo.complete_velocity([np.nan, 0.0, 0.0])


@given(vel3)
def test_constraint_holds(us):
    u = geo.complete_velocity(us)
    assert abs(geo.minkowski_dot(u, u) + 1.0) < 1e-14 * max(1.0, u[0] ** 2)
    assert u[0] >= 1.0


def test_rest_frame_pack():
    tp = geo.tensor_pack(geo.complete_velocity(np.zeros(3)))
    np.testing.assert_array_equal(tp.Pi, np.diag([0.0, 1, 1, 1]))
    np.testing.assert_array_equal(tp.G, np.eye(4))
    np.testing.assert_array_equal(tp.H, np.eye(3))


def test_boost_h11():
    tp = geo.tensor_pack(geo.complete_velocity([1.0, 0.0, 0.0]))
    assert tp.H[0, 0] == pytest.approx(0.5, abs=1e-15)


def test_tensor_pack_rejects_unnormalized():
    with pytest.raises(ConstraintViolated):
        geo.tensor_pack(np.array([1.0, 1.0, 0.0, 0.0]))


def test_identity_sweep():
    res = geo.identity_residuals(np.random.default_rng(1), 1000)
    assert max(res.values()) < 1e-12


@given(vel3)
def test_pack_invariants(us):
    u = geo.complete_velocity(us)
    tp = geo.tensor_pack(u)
    # Pi u_lower = 0, G B B = H, G and H positive definite
    np.testing.assert_allclose(tp.Pi @ geo.lower(u), 0.0, atol=1e-12 * u[0] ** 2)
    np.testing.assert_allclose(tp.B.T @ tp.G @ tp.B, tp.H, atol=1e-12 * u[0] ** 4)
    assert np.linalg.eigvalsh(tp.G)[0] > 0
    assert np.linalg.eigvalsh(tp.H)[0] > 0
    # G^{ab} inverts G_{ab}
    np.testing.assert_allclose(geo.G_inverse(u) @ tp.G, np.eye(4), atol=1e-11 * u[0] ** 4)


@given(vel3)
def test_projection_idempotent(us):
    u = geo.complete_velocity(us)
    P = geo.tensor_pack(u).Pi @ geo.ETA   # Pi^a_b
    np.testing.assert_allclose(P @ P, P, atol=1e-12 * u[0] ** 4)


def test_lin_velocity_zero_examples():
    rest = geo.complete_velocity(np.zeros(3))
    assert geo.lin_velocity_zero(rest, [0.3, -1.0, 2.0]) == 0.0
    u = geo.complete_velocity([1.0, 0.0, 0.0])
    assert geo.lin_velocity_zero(u, [1.0, 0.0, 0.0]) == pytest.approx(1 / np.sqrt(2), abs=1e-15)
    assert geo.lin_velocity_zero(u, [0.0, 0.0, 0.0]) == 0.0


@given(vel3, arrays(np.float64, 3, elements=st.floats(-5, 5)))
def test_completed_perturbation_orthogonal(us, ut):
    u = geo.complete_velocity(us)
    ut4 = np.concatenate([[geo.lin_velocity_zero(u, ut)], ut])
    assert abs(geo.minkowski_dot(u, ut4)) < 1e-12 * max(1.0, np.abs(ut).max() * u[0])


@settings(max_examples=50)
@given(vel3, arrays(np.float64, 3, elements=st.floats(-5, 5)))
def test_projection_fixes_orthogonal_vectors(us, ut):
    u = geo.complete_velocity(us)
    X = np.concatenate([[geo.lin_velocity_zero(u, ut)], ut])
    np.testing.assert_allclose(geo.tensor_pack(u).Pi @ geo.lower(X), X, atol=1e-11 * u[0] ** 2 * (1 + np.abs(X).max()))


def test_norm_comparability():
    rng = np.random.default_rng(4)
    u = geo.complete_velocity(geo.random_velocities(rng, 500, 3.0))
    ut = rng.normal(size=(3, 500))
    X = np.concatenate([geo.lin_velocity_zero(u, ut)[None], ut])
    C = geo.comparability_constant(u)
    assert np.all(np.isfinite(C))
    assert np.all(np.sum(X * X, axis=0) <= C * geo.g_norm_sq(u, X) * (1 + 1e-12))
