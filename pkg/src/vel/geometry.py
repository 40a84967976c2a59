"""Pointwise Minkowski tensor algebra, signature (-,+,+,+).

Vectors carry their component index first: a four-velocity field has shape
``(4, *grid)``, a spatial vector ``(3, *grid)``.  The helpers that act on
component lists (``complete_velocity_list`` and friends) also accept
:class:`vel.series.Series` entries so that dynamics can reuse them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import series as S
from .errors import ConstraintViolated, NonFinite

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])


def lower(v: np.ndarray) -> np.ndarray:
    """Lower the index of a four-vector field."""
    out = np.array(v, copy=True)
    out[0] = -out[0]
    return out


def minkowski_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]


def complete_velocity(u_spatial) -> np.ndarray:
    """Four-velocity from its spatial part, u^0 = sqrt(1 + |u|^2)."""
    us = np.asarray(u_spatial, dtype=float)
    if us.shape[0] != 3:
        raise ValueError("u_spatial needs 3 components along axis 0")
    if not np.all(np.isfinite(us)):
        raise NonFinite("non-finite velocity component")
    u0 = np.sqrt(1.0 + np.sum(us * us, axis=0))
    return np.concatenate([u0[None], us], axis=0)


def complete_velocity_list(u_sp: list):
    """u^0 from a list of three components (arrays or series)."""
    return S.sqrt(1.0 + u_sp[0] * u_sp[0] + u_sp[1] * u_sp[1] + u_sp[2] * u_sp[2])


def lin_velocity_zero(u, ut_spatial):
    """Time component of the perturbation fixed by orthogonality to u.

    ``u`` is a four-velocity (array with 4 leading components, or a list of
    four entries); ``ut_spatial`` the three spatial components of the
    perturbation.
    """
    return (u[1] * ut_spatial[0] + u[2] * ut_spatial[1] + u[3] * ut_spatial[2]) / u[0]


@dataclass(frozen=True)
class TensorPack:
    """Pi^{ab}, G_{ab}, H^{ij}, B^{ai} with component axes first."""

    Pi: np.ndarray
    G: np.ndarray
    H: np.ndarray
    B: np.ndarray
    u: np.ndarray

    @property
    def Ginv(self) -> np.ndarray:
        return _ginv(self.u)


def _eta_b(ndim_extra: int) -> np.ndarray:
    return ETA.reshape(ETA.shape + (1,) * ndim_extra)


def _ginv(u: np.ndarray) -> np.ndarray:
    return _eta_b(u.ndim - 1) + 2.0 * u[:, None] * u[None, :]


def check_constraint(u: np.ndarray, tol: float = 1e-10) -> float:
    res = float(np.max(np.abs(minkowski_dot(u, u) + 1.0)))
    if res > tol:
        raise ConstraintViolated(f"g(u,u)+1 = {res:.3e}")
    return res


def tensor_pack(u: np.ndarray, tol: float = 1e-10) -> TensorPack:
    u = np.asarray(u, dtype=float)
    check_constraint(u, tol)
    extra = u.ndim - 1
    ul = lower(u)
    eta = _eta_b(extra)
    Pi = eta + u[:, None] * u[None, :]
    G = eta + 2.0 * ul[:, None] * ul[None, :]
    d3 = np.eye(3).reshape((3, 3) + (1,) * extra)
    H = d3 - u[1:, None] * u[None, 1:] / u[0] ** 2
    B = np.zeros((4, 3) + u.shape[1:])
    B[0] = u[1:] / u[0]
    B[1:] = d3
    return TensorPack(Pi=Pi, G=G, H=H, B=B, u=u)


def G_inverse(u: np.ndarray) -> np.ndarray:
    """G^{ab} = g^{ab} + 2 u^a u^b, the inverse of G_{ab}."""
    return _ginv(np.asarray(u, dtype=float))


def g_norm_sq(u: np.ndarray, X: np.ndarray) -> np.ndarray:
    """|X|_G^2 = G_{ab} X^a X^b for an upper-index four-vector field X."""
    ul = lower(u)
    return minkowski_dot(X, X) + 2.0 * (np.sum(ul * X, axis=0)) ** 2


def comparability_constant(u: np.ndarray) -> np.ndarray:
    """C(u) with |X|_delta^2 <= C(u) |X|_G^2, i.e. 1 / lambda_min(G)."""
    G = tensor_pack(u).G
    Gm = np.moveaxis(G, (0, 1), (-2, -1))
    return 1.0 / np.linalg.eigvalsh(Gm)[..., 0]


def random_velocities(rng: np.random.Generator, n: int, vmax: float = 3.0) -> np.ndarray:
    """n spatial velocities with |u| <= vmax, shape (3, n)."""
    d = rng.normal(size=(3, n))
    d /= np.linalg.norm(d, axis=0)
    return d * vmax * rng.uniform(0.0, 1.0, size=n) ** (1.0 / 3.0)


def identity_residuals(rng: np.random.Generator, n: int = 1000, vmax: float = 3.0) -> dict[str, float]:
    """Max residuals of the algebraic identities over n random boosts."""
    u = complete_velocity(random_velocities(rng, n, vmax))
    tp = tensor_pack(u)
    GBB = np.einsum("abn,ain,bjn->ijn", tp.G, tp.B, tp.B)
    Pi_u = np.einsum("abn,bn->an", tp.Pi, lower(u))
    ut = rng.normal(size=(3, n))
    ut4 = np.concatenate([lin_velocity_zero(u, ut)[None], ut])
    PiPi = np.einsum("amn,mbn->abn", np.einsum("amn,mcn->acn", tp.Pi, _eta_b(1) * np.ones((1, 1, n))), tp.Pi)
    X = ut4
    PiX = np.einsum("amn,mn->an", tp.Pi, lower(X))
    return {
        "GBB_minus_H": float(np.max(np.abs(GBB - tp.H))),
        "Pi_u": float(np.max(np.abs(Pi_u))),
        "ut_dot_u": float(np.max(np.abs(minkowski_dot(ut4, u)))),
        "Pi_idempotent": float(np.max(np.abs(PiPi - tp.Pi))),
        "Pi_on_orthogonal": float(np.max(np.abs(PiX - X))),
        "u_constraint": float(np.max(np.abs(minkowski_dot(u, u) + 1.0))),
    }
