"""Ideal-gas variable changes between (n, eps, p) and the (s, r) pair.

The weight r = p^((gamma-1)/gamma) plays the role of the distance to the
vacuum boundary; Gamma(s) is the entropy-dependent coefficient that, added to
r, multiplies the acceleration in the momentum equation.

All functions accept numpy arrays and :class:`vel.series.Series` alike.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import series as S
from .errors import NegativeInput


@dataclass(frozen=True)
class GasParams:
    gamma: float = 2.0
    s0: float = 0.0

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not np.isfinite(self.s0):
            raise ValueError("s0 must be finite")

    @property
    def beta(self) -> float:
        """Boundary decay exponent 1/(gamma-1) of the density."""
        return 1.0 / (self.gamma - 1.0)


def gamma_of_entropy(s, params: GasParams):
    g = params.gamma
    k = (g - 1.0) / g
    return (g - 1.0) ** k / g * S.exp(-k * (s - params.s0))


def dgamma_ds(s, params: GasParams):
    """Gamma'(s) = -((gamma-1)/gamma) Gamma(s)."""
    g = params.gamma
    return -(g - 1.0) / g * gamma_of_entropy(s, params)


def enthalpy(r, s, params: GasParams):
    G = gamma_of_entropy(s, params)
    return (G + r) / G


def sound_speed_sq(r, s, params: GasParams):
    return (params.gamma - 1.0) * r / (gamma_of_entropy(s, params) + r)


@dataclass(frozen=True)
class ThermoPoint:
    s: np.ndarray
    r: np.ndarray
    p: np.ndarray
    eps: np.ndarray
    n: np.ndarray
    h: np.ndarray
    Gamma: np.ndarray

    @property
    def theta(self):
        """Temperature p/n (zero where the gas is absent)."""
        return _safe_div(self.p, self.n)


def _safe_div(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros(np.broadcast(a, b).shape)
    np.divide(a, b, out=out, where=b != 0)
    return out


def point_from_pr(value, s, params: GasParams, kind: str = "p") -> ThermoPoint:
    """Build the full thermodynamic point from pressure (kind='p') or r (kind='r')."""
    v = np.asarray(value, dtype=float)
    if np.any(v < 0):
        raise NegativeInput(f"{kind} must be non-negative")
    g = params.gamma
    s = np.asarray(s, dtype=float)
    if kind == "p":
        p = v
        r = p ** ((g - 1.0) / g)
    elif kind == "r":
        r = v
        p = r ** (g / (g - 1.0))
    else:
        raise ValueError("kind must be 'p' or 'r'")
    G = gamma_of_entropy(s, params)
    eps = r / (g * G)
    n = _safe_div(p, eps * (g - 1.0))
    h = eps * g + 1.0
    shape = np.broadcast(r, s).shape
    def arr(x):
        return np.broadcast_to(np.asarray(x, dtype=float), shape).copy()
    return ThermoPoint(s=arr(s), r=arr(r), p=arr(p), eps=arr(eps), n=arr(n), h=arr(h), Gamma=arr(G))


def entropy_from(eps, n, params: GasParams):
    """s = log(eps / n^(gamma-1)) / (gamma-1) + s0."""
    g = params.gamma
    return np.log(eps / n ** (g - 1.0)) / (g - 1.0) + params.s0
