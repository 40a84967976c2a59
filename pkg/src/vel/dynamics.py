"""Nonlinear and linearized flow: time-derivative elimination, manufactured
backgrounds, time stepping and the energy bookkeeping of the basic estimate.

Unknowns: background (s, r, u^j) and perturbation (s~, r~, u~^j); the time
components u^0 = sqrt(1 + |u|^2) and u~^0 = u_j u~^j / u^0 are always derived.

Time derivatives are never differenced.  Every routine works on time-Taylor
series (:mod:`vel.series`): the closed-form elimination gives d/dt of the
unknowns from their current values, and applying it recursively yields the
full series, from which D_t powers and time derivatives of energies follow
exactly (up to the spatial discretisation).

Forced (manufactured) backgrounds solve

    D_t s = F_s,   D_t r + (g-1) r d_mu u^mu = F_r,
    D_t u^a + Pi^{a mu} d_mu r / (Gamma + r) = Pi^a_b F^b,

with F^b orthogonal to u.  Writing the momentum forcing through the
projector keeps the linearized constraint u~ . u = 0 invariant: the
linearization contributes the extra source u^a (u~ . F) to the u~ equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import sympy as sp

from . import series as S
from .errors import (
    BoundaryVelocityNonzero,
    CflViolated,
    DegenerateA1,
    MissingTimeDerivative,
    SeriesTooShort,
)
from .grid_norms import Grid
from .thermo import GasParams, dgamma_ds, gamma_of_entropy

A1_FLOOR = 1e-8


# ---------------------------------------------------------------- states
@dataclass
class BackgroundState:
    grid: Grid
    s: np.ndarray
    r: np.ndarray
    u: np.ndarray  # (3, *grid.shape) spatial components
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        for name in ("s", "r", "u"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"background field {name} is not finite")

    @property
    def u0(self) -> np.ndarray:
        return np.sqrt(1.0 + np.sum(self.u**2, axis=0))

    @property
    def u4(self) -> list:
        return [self.u0, self.u[0], self.u[1], self.u[2]]


@dataclass
class LinearizedState:
    grid: Grid
    s: np.ndarray
    r: np.ndarray
    u: np.ndarray  # (3, *grid.shape)
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)

    def u0(self, bg_u) -> np.ndarray:
        """Time component fixed by orthogonality to the background velocity."""
        u0 = np.sqrt(1.0 + sum(bg_u[j] ** 2 for j in range(3)))
        return sum(bg_u[j] * self.u[j] for j in range(3)) / u0

    def u4(self, bg_u) -> list:
        return [self.u0(bg_u), self.u[0], self.u[1], self.u[2]]

    def scaled(self, c: float) -> "LinearizedState":
        return LinearizedState(self.grid, c * self.s, c * self.r, c * self.u, self.t)

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "LinearizedState":
        return cls(grid, grid.zeros(), grid.zeros(), grid.zeros(3), t)


@dataclass
class Forcing:
    """Manufactured forcing: F_s, F_r and the spatial part of F^a (F^0 = u.F/u^0)."""

    s: object
    r: object
    u: tuple

    @classmethod
    def zero(cls) -> "Forcing":
        return cls(0.0, 0.0, (0.0, 0.0, 0.0))

    def is_zero(self) -> bool:
        vals = [self.s, self.r, *self.u]
        return all(np.all(np.asarray(S.value(v)) == 0) for v in vals)


@dataclass
class BgSeries:
    """Background fields as time series at one time slice (orders may differ)."""

    grid: Grid
    params: GasParams
    s: S.Series
    r: S.Series
    u: tuple  # three Series
    forcing: Forcing | None = None
    t: float = 0.0

    @property
    def order(self) -> int:
        return min(self.s.order, self.r.order, *(c.order for c in self.u))

    def truncate(self, order: int) -> "BgSeries":
        f = self.forcing
        if f is not None:
            tr = lambda x: x.truncate(order) if isinstance(x, S.Series) else x
            f = Forcing(tr(f.s), tr(f.r), tuple(tr(c) for c in f.u))
        return replace(self, s=self.s.truncate(order), r=self.r.truncate(order),
                       u=tuple(c.truncate(order) for c in self.u), forcing=f)

    @property
    def u0(self):
        return S.sqrt(1.0 + self.u[0] * self.u[0] + self.u[1] * self.u[1] + self.u[2] * self.u[2])

    @property
    def u4(self) -> list:
        return [self.u0, *self.u]

    def value_state(self) -> BackgroundState:
        return BackgroundState(self.grid, S.value(self.s), S.value(self.r),
                               np.stack([S.value(c) for c in self.u]), self.t)


# ---------------------------------------------------------------- helpers
def _adv(grid: Grid, u, f):
    """u^i d_i f."""
    return u[0] * grid.d(f, 1) + u[1] * grid.d(f, 2) + u[2] * grid.d(f, 3)


def _div(grid: Grid, v):
    return grid.d(v[0], 1) + grid.d(v[1], 2) + grid.d(v[2], 3)


def _dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _zero_like(x):
    return x * 0.0


def _check_a1(a1) -> None:
    m = float(np.min(S.value(a1)))
    if not m > A1_FLOOR:
        raise DegenerateA1(f"a1 = {m:.3e}: smallness of r violated")


def a1_coefficient(r, u0, Gamma, gamma: float):
    """a_1 = u^0 - (g-1)((u^0)^2 - 1) r / ((Gamma + r) u^0)."""
    return u0 - (gamma - 1.0) * (u0 * u0 - 1.0) * r / ((Gamma + r) * u0)


def _forcing_parts(forcing: Forcing | None, like):
    if forcing is None:
        z = _zero_like(like)
        return z, z, (z, z, z)
    return forcing.s, forcing.r, forcing.u


# ---------------------------------------------------------------- elimination
def nonlinear_time_derivatives(grid: Grid, params: GasParams, s, r, u, forcing: Forcing | None = None):
    """Closed-form d/dt (s, r, u^j) of the (optionally forced) nonlinear system."""
    g = params.gamma
    u0 = S.sqrt(1.0 + _dot3(u, u))
    K = gamma_of_entropy(s, params) + r
    Fs, Fr, Fu = _forcing_parts(forcing, r)
    A = [_adv(grid, u, u[j]) for j in range(3)]
    a = _adv(grid, u, r)
    a1 = a1_coefficient(r, u0, K - r, g)
    _check_a1(a1)
    s_t = (Fs - _adv(grid, u, s)) / u0
    uF, uA = _dot3(u, Fu), _dot3(u, A)
    r_t = (Fr - a - (g - 1.0) * r * ((uF - uA) / (u0 * u0) - a / K + _div(grid, u))) / a1
    u_t = tuple((Fu[j] - A[j] - (u[j] * u0 * r_t + grid.d(r, j + 1) + u[j] * a) / K) / u0 for j in range(3))
    return s_t, r_t, u_t


def linearized_sources(grid: Grid, params: GasParams, bg: BgSeries, s_t, r_t, u_t):
    """(f, g, h^a) of the linearized system; h includes the forcing source.

    Needs background time derivatives, i.e. series of order >= 1.
    """
    if bg.order < 1:
        raise MissingTimeDerivative("background series must carry d/dt")
    gm = params.gamma
    s, r, u = bg.s, bg.r, bg.u
    u0 = bg.u0
    K = gamma_of_entropy(s, params) + r
    Gp = dgamma_ds(s, params)
    dts, dtr = s.derivative(), r.derivative()
    dtu = tuple(c.derivative() for c in u)
    dtu0 = _dot3(u, dtu) / u0
    ut0 = _dot3(u, u_t) / u0
    theta = dtu0 + _div(grid, u)
    f = -(ut0 * dts + _dot3(u_t, [grid.d(s, i) for i in (1, 2, 3)]))
    g = -(gm - 1.0) * r_t * theta
    dr_sp = [grid.d(r, i) for i in (1, 2, 3)]
    ut_dr = ut0 * dtr + _dot3(u_t, dr_sp)
    u_dr = u0 * dtr + _dot3(u, dr_sp)
    coef = (Gp * s_t + r_t) / (K * K)
    ut4 = [ut0, *u_t]
    u4 = [u0, *u]
    dtu4 = [dtu0, *dtu]
    h = []
    for a in range(4):
        # Pi^{a mu} d_mu r = -d^a r (upper) + u^a (u.dr);  d^0 r = -d_t r
        dr_up = -dtr if a == 0 else dr_sp[a - 1]
        Pi_dr = dr_up + u4[a] * u_dr
        if a == 0:
            ut_du = ut0 * dtu4[0] + _dot3(u_t, [grid.d(u0, i) for i in (1, 2, 3)])
        else:
            ut_du = ut0 * dtu4[a] + _dot3(u_t, [grid.d(u[a - 1], i) for i in (1, 2, 3)])
        ha = -ut_du - (ut4[a] * u_dr + u4[a] * ut_dr) / K + coef * Pi_dr
        h.append(ha)
    if bg.forcing is not None:
        Fu = bg.forcing.u
        F0 = _dot3(u, Fu) / u0
        ut_F = -ut0 * F0 + _dot3(u_t, Fu)
        h = [h[a] + u4[a] * ut_F for a in range(4)]
    return f, g, tuple(h)


def linearized_time_derivatives(grid: Grid, params: GasParams, bg: BgSeries, s_t, r_t, u_t):
    """Closed-form d/dt (s~, r~, u~^j); background series must reach one order higher."""
    gm = params.gamma
    s, r, u = bg.s, bg.r, bg.u
    u0 = bg.u0
    K = gamma_of_entropy(s, params) + r
    a1 = a1_coefficient(r, u0, K - r, gm)
    _check_a1(a1)
    f, g, h = linearized_sources(grid, params, bg, s_t, r_t, u_t)
    dtr = r.derivative()
    dtu = tuple(c.derivative() for c in u)
    ut0 = _dot3(u, u_t) / u0
    adv_r = _adv(grid, u, r_t)
    adv_u = [_adv(grid, u, u_t[j]) for j in range(3)]
    ut_dr = ut0 * dtr + _dot3(u_t, [grid.d(r, i) for i in (1, 2, 3)])
    hs = h[1:]
    known_ut0 = _dot3(u_t, dtu) / u0 - ut0 * _dot3(u, dtu) / (u0 * u0)
    uh = (_dot3(u, hs) - _dot3(u, adv_u)) / (u0 * u0) - adv_r / K
    s_dot = (f - _adv(grid, u, s_t)) / u0
    r_dot = (g - adv_r - ut_dr - (gm - 1.0) * r * (_div(grid, u_t) + known_ut0 + uh)) / a1
    u_dot = tuple((hs[j] - adv_u[j] - (u[j] * u0 * r_dot + grid.d(r_t, j + 1) + u[j] * adv_r) / K) / u0
                  for j in range(3))
    return s_dot, r_dot, u_dot


# ---------------------------------------------------------------- oracles
def nonlinear_implicit_system(grid: Grid, params: GasParams, s, r, u, forcing: Forcing | None = None):
    """Matrix M (5,5,*shape) and vector b (5,*shape) with M d_t q = b.

    Rows: entropy, r and the three spatial momentum equations, assembled
    directly from the conservation form (no elimination).
    """
    g = params.gamma
    shape = np.shape(r)
    u0 = np.sqrt(1.0 + _dot3(u, u))
    K = gamma_of_entropy(s, params) + r
    Fs, Fr, Fu = _forcing_parts(forcing, r)
    M = np.zeros((5, 5) + shape)
    b = np.zeros((5,) + shape)
    M[0, 0] = u0
    b[0] = Fs - _adv(grid, u, s)
    M[1, 1] = u0
    for j in range(3):
        # d_t u^0 = u_j d_t u^j / u^0 inside the divergence
        M[1, 2 + j] = (g - 1.0) * r * u[j] / u0
    b[1] = Fr - _adv(grid, u, r) - (g - 1.0) * r * _div(grid, u)
    for j in range(3):
        M[2 + j, 1] = u[j] * u0 / K
        M[2 + j, 2 + j] = u0
        Pi_sp = grid.d(r, j + 1) + u[j] * _adv(grid, u, r)
        b[2 + j] = Fu[j] - _adv(grid, u, u[j]) - Pi_sp / K
    return M, b


def linearized_implicit_system(grid: Grid, params: GasParams, bg: BgSeries, s_t, r_t, u_t):
    """M d_t (s~, r~, u~^j) = b assembled from the linearized equations as written."""
    gm = params.gamma
    sv, rv = S.value(bg.s), S.value(bg.r)
    uv = [S.value(c) for c in bg.u]
    shape = np.shape(rv)
    u0 = np.sqrt(1.0 + _dot3(uv, uv))
    K = gamma_of_entropy(sv, params) + rv
    dtr = S.value(bg.r.derivative())
    dtu = [S.value(c.derivative()) for c in bg.u]
    f, g, h = linearized_sources(grid, params, bg, s_t, r_t, u_t)
    f, g = S.value(f), S.value(g)
    h = [S.value(x) for x in h]
    ut0 = _dot3(uv, u_t) / u0
    M = np.zeros((5, 5) + shape)
    b = np.zeros((5,) + shape)
    M[0, 0] = u0
    b[0] = f - _adv(grid, uv, s_t)
    # r~ equation: D_t r~ + u~^mu d_mu r + (g-1) r (d_t u~^0 + d_i u~^i) = g
    M[1, 1] = u0
    for j in range(3):
        M[1, 2 + j] = (gm - 1.0) * rv * uv[j] / u0
    dtu0 = _dot3(uv, dtu) / u0
    dt_ut0_known = (_dot3(u_t, dtu) - ut0 * dtu0) / u0
    ut_dr = ut0 * dtr + _dot3(u_t, [grid.d(rv, i) for i in (1, 2, 3)])
    b[1] = g - _adv(grid, uv, r_t) - ut_dr - (gm - 1.0) * rv * (_div(grid, u_t) + dt_ut0_known)
    # u~^j equations: D_t u~^j + Pi^{j mu} d_mu r~ / K = h^j
    for j in range(3):
        M[2 + j, 1] = uv[j] * u0 / K
        M[2 + j, 2 + j] = u0
        Pi_sp = grid.d(r_t, j + 1) + uv[j] * _adv(grid, uv, r_t)
        b[2 + j] = h[1 + j] - _adv(grid, uv, u_t[j]) - Pi_sp / K
    return M, b


def solve_implicit(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched 5x5 solve over grid nodes; returns (5, *shape)."""
    Mm = np.moveaxis(M, (0, 1), (-2, -1))
    bm = np.moveaxis(b, 0, -1)[..., None]
    return np.moveaxis(np.linalg.solve(Mm, bm)[..., 0], -1, 0)


# ---------------------------------------------------------------- series
def background_series_from_state(state: BackgroundState, params: GasParams, order: int,
                                 forcing: Forcing | None = None) -> BgSeries:
    """Time series of an unforced (or time-independently forced) background."""
    grid = state.grid

    def rhs(q):
        s, r, u1, u2, u3 = q
        st, rt, ut = nonlinear_time_derivatives(grid, params, s, r, (u1, u2, u3), forcing)
        return [st, rt, *ut]

    qs = S.recurse([state.s, state.r, *state.u], rhs, order)
    return BgSeries(grid, params, qs[0], qs[1], tuple(qs[2:]), forcing, state.t)


def linearized_series(bg: BgSeries, lin: LinearizedState, order: int) -> tuple:
    """(s~, r~, (u~^1, u~^2, u~^3)) as series of the given order."""
    if bg.order < order + 1:
        raise SeriesTooShort(f"background order {bg.order} < {order + 1}")
    grid, params = bg.grid, bg.params

    def rhs(q):
        n = q[0].order
        b = bg.truncate(n + 1)
        sd, rd, ud = linearized_time_derivatives(grid, params, b, q[0], q[1], tuple(q[2:]))
        return [sd, rd, *ud]

    qs = S.recurse([lin.s, lin.r, *lin.u], rhs, order)
    return qs[0], qs[1], tuple(qs[2:])


def dt_apply(f, bg: BgSeries):
    """D_t f = u^0 d_t f + u^i d_i f, for f given as a time series."""
    if not isinstance(f, S.Series) or f.order < 1:
        raise MissingTimeDerivative("D_t needs the time derivative of its argument")
    n = f.order - 1
    u = [c.truncate(n) for c in bg.u]
    u0 = S.sqrt(1.0 + _dot3(u, u))
    return u0 * f.derivative() + _adv(bg.grid, u, f.truncate(n))


def convective_powers(bg: BgSeries, lin_series: tuple, n: int) -> list:
    """[(D_t^j r~, D_t^j u~ as four components) for j = 0..n]."""
    s_t, r_t, u_t = lin_series
    u0 = bg.u0
    ut0 = _dot3(bg.u, u_t) / u0
    cur_r, cur_u = r_t, [ut0, *u_t]
    out = [(cur_r, cur_u)]
    for _ in range(n):
        cur_r = dt_apply(cur_r, bg)
        cur_u = [dt_apply(c, bg) for c in cur_u]
        out.append((cur_r, cur_u))
    return out


# ---------------------------------------------------------------- analytic backgrounds
T, X1, X2 = sp.symbols("t x1 x2", real=True)
_SERIES_MODULE = {"sin": S.sin, "cos": S.cos, "exp": S.exp, "sqrt": S.sqrt, "log": S.log}


def _lambdify(expr):
    fn = sp.lambdify((T, X1, X2), expr, modules=[_SERIES_MODULE, "numpy"], cse=True)
    return fn


def _as_series(v, order: int, shape) -> S.Series:
    if isinstance(v, S.Series):
        if v.shape != tuple(shape):
            v = S.Series(np.broadcast_to(v.c, (v.c.shape[0],) + tuple(shape)).copy())
        return v
    return S.Series.constant(np.broadcast_to(np.asarray(v, dtype=float), shape), order)


@dataclass
class AnalyticBackground:
    """Background given in closed form; the forcing making it exact is derived symbolically."""

    grid: Grid
    params: GasParams
    s_expr: sp.Expr
    r_expr: sp.Expr
    u_expr: tuple
    name: str = "analytic"
    _fns: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.u_expr = tuple(sp.sympify(e) for e in self.u_expr) + (sp.Integer(0),) * (3 - len(self.u_expr))
        self._fns = {}
        self._cache = {}

    # ---- symbolic pieces
    def symbolic_forcing(self) -> tuple:
        g = sp.nsimplify(self.params.gamma)
        s, r, u = self.s_expr, self.r_expr, self.u_expr
        u0 = sp.sqrt(1 + sum(c**2 for c in u))
        kk = (g - 1) / g
        Gam = (g - 1) ** kk / g * sp.exp(-kk * (s - self.params.s0))
        K = Gam + r
        xs = (X1, X2, sp.Symbol("x3"))

        def D(f):
            return u0 * sp.diff(f, T) + sum(u[i] * sp.diff(f, xs[i]) for i in range(3))

        div = sp.diff(u0, T) + sum(sp.diff(u[i], xs[i]) for i in range(3))
        Fs = D(s)
        Fr = D(r) + (g - 1) * r * div
        u_dr = D(r)
        Fu = tuple(D(u[j]) + (sp.diff(r, xs[j]) + u[j] * u_dr) / K for j in range(3))
        return Fs, Fr, Fu

    def _fn(self, key: str):
        if key not in self._fns:
            if key == "fields":
                exprs = [self.s_expr, self.r_expr, *self.u_expr]
            else:
                Fs, Fr, Fu = self.symbolic_forcing()
                exprs = [Fs, Fr, *Fu]
            self._fns[key] = [_lambdify(e) for e in exprs]
        return self._fns[key]

    def _eval(self, key: str, t: float, order: int) -> list:
        shape = self.grid.shape
        tt = S.Series.variable(t, order, shape)
        x1 = self.grid.coords[0]
        x2 = self.grid.coords[1] if self.grid.dim > 1 else np.zeros(shape)
        return [_as_series(fn(tt, x1, x2), order, shape) for fn in self._fn(key)]

    def series(self, t: float, order: int, forced: bool = True) -> BgSeries:
        key = (float(t), order, forced)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        s, r, u1, u2, u3 = self._eval("fields", t, order)
        forcing = None
        if forced:
            Fs, Fr, F1, F2, F3 = self._eval("forcing", t, order)
            forcing = Forcing(Fs, Fr, (F1, F2, F3))
        out = BgSeries(self.grid, self.params, s, r, (u1, u2, u3), forcing, t)
        if len(self._cache) >= 16:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = out
        return out

    def state(self, t: float) -> BackgroundState:
        return self.series(t, 0, forced=False).value_state()

    def forcing_at(self, t: float) -> Forcing:
        Fs, Fr, F1, F2, F3 = self._eval("forcing", t, 0)
        return Forcing(Fs.value, Fr.value, (F1.value, F2.value, F3.value))

    def check_fixed_domain(self, t: float = 0.0, tol: float = 1e-12) -> None:
        """Zero normal velocity on every vacuum end, as fixed-domain runs require."""
        st = self.state(t)
        for k, ax in enumerate(self.grid.axes):
            for j in ax.vacuum_nodes():
                sl = [slice(None)] * self.grid.dim
                sl[k] = j
                if np.max(np.abs(st.u[k][tuple(sl)])) > tol:
                    raise BoundaryVelocityNonzero(f"normal velocity nonzero at vacuum end of axis {k}")


def manufactured_forcing(bg: AnalyticBackground, t: float = 0.0) -> Forcing:
    """Forcing under which the analytic background solves the system exactly."""
    if bg.grid.has_vacuum:
        bg.check_fixed_domain(t)
    return bg.forcing_at(t)


def discrete_forcing_residual(bg: AnalyticBackground, t: float = 0.0) -> float:
    """Max residual of the forced system on the grid with finite-difference space derivatives."""
    b = bg.series(t, 1)
    grid, params = bg.grid, bg.params
    sv = b.value_state()
    st, rt, ut = nonlinear_time_derivatives(grid, params, sv.s, sv.r, sv.u, bg.forcing_at(t))
    exact = [b.s.derivative().value, b.r.derivative().value, *(c.derivative().value for c in b.u)]
    got = [st, rt, *ut]
    return max(float(np.max(np.abs(a - e))) for a, e in zip(got, exact))


# ---- scenario library
def constant_background(grid: Grid, params: GasParams, r0: float = 0.1, s0: float = 0.0,
                        u: tuple = (0.0, 0.0, 0.0)) -> AnalyticBackground:
    return AnalyticBackground(grid, params, sp.Float(s0), sp.Float(r0), tuple(sp.Float(c) for c in u),
                              name="constant_state")


def static_rest_background(grid: Grid, params: GasParams, amp: float = 0.3) -> AnalyticBackground:
    """Rest frame, s = 0, r vanishing simply at both ends of [0, L], max r = amp."""
    L = grid.axes[-1].length
    xv = X1 if grid.dim == 1 else X2
    q = xv * (L - xv) / L**2
    r = amp * 4 * q * (1 + sp.Rational(1, 4) * q) / sp.Rational(5, 4)
    return AnalyticBackground(grid, params, sp.Integer(0), r, (0, 0, 0), name="static_rest_frame")


def manufactured_1d_background(grid: Grid, params: GasParams, amp: float = 0.25) -> AnalyticBackground:
    """Smooth time-dependent 1-D flow on [0, L] with vacuum at both ends and u^1 = 0 there."""
    L = grid.axes[0].length
    xi = X1 / L
    q = xi * (1 - xi)
    r = amp * 4 * q * (1 + sp.Rational(1, 5) * sp.sin(T) * sp.cos(sp.pi * xi)) / sp.Rational(6, 5)
    s = sp.Rational(1, 10) * sp.cos(sp.pi * xi) * sp.cos(T)
    u1 = sp.Rational(1, 5) * sp.sin(sp.pi * xi) * sp.cos(sp.pi * xi) * (1 + sp.Rational(1, 2) * sp.sin(T))
    return AnalyticBackground(grid, params, s, r, (u1, 0, 0), name="manufactured_1d")


def slab_2d_background(grid: Grid, params: GasParams, amp: float = 0.25) -> AnalyticBackground:
    """Periodic in x1, vacuum at both ends in x2, transverse shear and a zero normal velocity."""
    L1, L2 = grid.axes[0].length, grid.axes[1].length
    a = 2 * sp.pi * X1 / L1
    eta = X2 / L2
    q = eta * (1 - eta)
    r = amp * 4 * q * (1 + sp.Rational(1, 10) * sp.cos(a) * sp.cos(T)) / sp.Rational(11, 10)
    s = sp.Rational(1, 20) * sp.sin(a) * sp.cos(sp.pi * eta)
    u1 = sp.Rational(1, 10) * sp.cos(sp.pi * eta) * (1 + sp.Rational(1, 5) * sp.sin(a + T))
    u2 = sp.Rational(1, 10) * sp.sin(sp.pi * eta) * sp.sin(a) * sp.cos(T)
    return AnalyticBackground(grid, params, s, r, (u1, u2, 0), name="slab_2d")


def localized_slab_background(grid: Grid, params: GasParams, wobble: float = 0.02) -> AnalyticBackground:
    """Slab flow whose r behaves like the distance to the vacuum: d_2 r = 1 + O(wobble) there."""
    L1, L2 = grid.axes[0].length, grid.axes[1].length
    a = 2 * sp.pi * X1 / L1
    eta = X2 / L2
    q = eta * (1 - eta)
    r = L2 * q * (1 + q) * (1 + wobble * sp.cos(a) * sp.cos(T)) / (1 + wobble)
    s = sp.Rational(1, 20) * sp.sin(a) * q
    u1 = sp.Rational(1, 10) * sp.cos(sp.pi * eta) * (1 + sp.Rational(1, 5) * sp.sin(a + T))
    u2 = sp.Rational(1, 10) * sp.sin(sp.pi * eta) * sp.sin(a) * sp.cos(T)
    return AnalyticBackground(grid, params, s, r, (u1, u2, 0), name="localized_slab")


# ---------------------------------------------------------------- stepping
def max_wave_speed(bg_state: BackgroundState, params: GasParams) -> float:
    G = gamma_of_entropy(bg_state.s, params)
    c = np.sqrt(np.maximum((params.gamma - 1.0) * bg_state.r / (G + bg_state.r), 0.0))
    return float(np.max(c + np.sqrt(np.sum(bg_state.u**2, axis=0))))


def min_spacing(grid: Grid) -> float:
    return min(float(np.min(np.diff(ax.nodes))) for ax in grid.axes)


def stable_dt(bg_state: BackgroundState, params: GasParams, cfl: float = 0.5) -> float:
    return cfl * min_spacing(bg_state.grid) / max(max_wave_speed(bg_state, params), 1e-12)


def _lin_rhs(bg: AnalyticBackground | Callable, t: float, q: LinearizedState):
    b = bg.series(t, 1)
    sd, rd, ud = linearized_time_derivatives(q.grid, bg.params, b, q.s, q.r, tuple(q.u))
    return S.value(sd), S.value(rd), np.stack([S.value(c) for c in ud])


def step_rk4(bg: AnalyticBackground, lin: LinearizedState, dt: float, check_cfl: bool = True) -> LinearizedState:
    """Advance the perturbation one classical RK4 step on an analytic background."""
    if check_cfl:
        lim = stable_dt(bg.state(lin.t), bg.params, 0.5)
        if dt > lim * (1 + 1e-12):
            raise CflViolated(f"dt = {dt:.3e} exceeds {lim:.3e}")
    t = lin.t

    def add(q, k, c):
        return LinearizedState(q.grid, q.s + c * k[0], q.r + c * k[1], q.u + c * k[2], q.t)

    k1 = _lin_rhs(bg, t, lin)
    k2 = _lin_rhs(bg, t + dt / 2, add(lin, k1, dt / 2))
    k3 = _lin_rhs(bg, t + dt / 2, add(lin, k2, dt / 2))
    k4 = _lin_rhs(bg, t + dt, add(lin, k3, dt))
    ks = [sum(w * k[i] for w, k in zip((1, 2, 2, 1), (k1, k2, k3, k4))) for i in range(3)]
    out = LinearizedState(lin.grid, lin.s + dt / 6 * ks[0], lin.r + dt / 6 * ks[1], lin.u + dt / 6 * ks[2], t + dt)
    if not (np.all(np.isfinite(out.r)) and np.all(np.isfinite(out.u))):
        raise FloatingPointError("perturbation blew up")
    return out


def step_rk4_nonlinear(state: BackgroundState, params: GasParams, dt: float,
                       forcing: Forcing | None = None, check_cfl: bool = True) -> BackgroundState:
    """One RK4 step of the nonlinear system (u^0 recompleted at every stage)."""
    if check_cfl:
        lim = stable_dt(state, params, 0.5)
        if dt > lim * (1 + 1e-12):
            raise CflViolated(f"dt = {dt:.3e} exceeds {lim:.3e}")
    grid = state.grid

    def rhs(q):
        st, rt, ut = nonlinear_time_derivatives(grid, params, q[0], q[1], q[2], forcing)
        return st, rt, np.stack(ut)

    q0 = (state.s, state.r, state.u)

    def add(q, k, c):
        return tuple(a + c * b for a, b in zip(q, k))

    k1 = rhs(q0)
    k2 = rhs(add(q0, k1, dt / 2))
    k3 = rhs(add(q0, k2, dt / 2))
    k4 = rhs(add(q0, k3, dt))
    new = [q0[i] + dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(3)]
    return BackgroundState(grid, new[0], new[1], new[2], state.t + dt)


# ---------------------------------------------------------------- energy identity
def perfect_derivative_residual(grid: Grid, gamma: float, r, r_t, u_t4: list):
    """Pointwise defect of the perfect-derivative identity of the basic estimate.

    All arguments are series of order >= 1 (the time index mu = 0 uses d/dt);
    ``u_t4`` is the perturbation velocity as four components.
    """
    beta = 1.0 / (gamma - 1.0)
    n = min(x.order for x in (r, r_t, *u_t4)) - 1
    if n < 0:
        raise MissingTimeDerivative("series of order >= 1 required")

    def dmu(f, mu):
        return f.derivative() if mu == 0 else grid.d(f.truncate(n), mu)

    rb = r ** beta
    rb1 = r ** (beta - 1.0)
    term1 = beta * rb1.truncate(n) * r_t.truncate(n) * sum(u_t4[m].truncate(n) * dmu(r, m) for m in range(4))
    term2 = rb.truncate(n) * r_t.truncate(n) * sum(dmu(u_t4[m], m) for m in range(4))
    term3 = rb.truncate(n) * sum(u_t4[m].truncate(n) * dmu(r_t, m) for m in range(4))
    flux = sum(dmu(rb * r_t * u_t4[m], m) for m in range(4))
    return term1 + term2 + term3 - flux


def energy_density(gamma: float, r, Gamma, s_t, r_t, u_t4: list, u4: list):
    """Integrand of E^0 divided by the weight r^{(2-g)/(g-1)}."""
    ug = -u_t4[0] * u_t4[0] + u_t4[1] * u_t4[1] + u_t4[2] * u_t4[2] + u_t4[3] * u_t4[3]
    return 0.5 * (r_t * r_t / (gamma - 1.0) + (Gamma + r) * r * ug + r * s_t * s_t)


@dataclass
class BasicEstimateCoefficients:
    """Pointwise-measured constants of the basic energy inequality at one time.

    With M = E^0 + int X / u^0 (X = r^{1/(g-1)} r~ u~^0) the identity
    dM/dt = int Q holds with Q a quadratic form in the undifferentiated
    perturbation; C_Q = sup |Q| / e and kappa = sup |X/u^0| / e with e the
    energy density.  Then |M - E^0| <= kappa E^0 and the Gronwall rate is
    C_hat = C_Q / (1 - kappa).
    """

    C_Q: float
    kappa: float

    @property
    def C_hat(self) -> float:
        return self.C_Q / (1.0 - self.kappa)

    @property
    def prefactor(self) -> float:
        return (1.0 + self.kappa) / (1.0 - self.kappa)


def _smooth_ratio(grid: Grid, num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num/den for fields vanishing together at the vacuum ends."""
    if not grid.has_vacuum:
        return num / den
    return grid.rho(num, check=False) / grid.rho(den, check=False)


def basic_estimate_forms(bg: BgSeries):
    """Per-node matrices (E, Q, Xf) of the quadratic forms in z = (c, a, b1, b2, b3).

    Scaled unknowns: c = r^{b/2} s~, a = r^{(b-1)/2} r~, b = r^{b/2} u~ (b = 1/(g-1)),
    so that the energy density reads 1/2 (a^2/(g-1) + (Gamma + r)|b|_g^2 + c^2).
    """
    grid, params = bg.grid, bg.params
    gm = params.gamma
    beta = 1.0 / (gm - 1.0)
    b1 = bg.truncate(1)
    s, r = S.value(b1.s), S.value(b1.r)
    u = [S.value(c) for c in b1.u]
    dts, dtr = S.value(b1.s.derivative()), S.value(b1.r.derivative())
    dtu = [S.value(c.derivative()) for c in b1.u]
    u0 = np.sqrt(1.0 + _dot3(u, u))
    dtu0 = _dot3(u, dtu) / u0
    G = gamma_of_entropy(s, params)
    Gp = dgamma_ds(s, params)
    K = G + r
    shape = grid.shape
    # spacetime gradients of background quantities, index mu = 0..3
    def grad(f, ft):
        return [ft] + [grid.d(f, i) for i in (1, 2, 3)]
    ds, dr = grad(s, dts), grad(r, dtr)
    du = [grad(u0, dtu0)] + [grad(u[j], dtu[j]) for j in range(3)]  # du[alpha][mu]
    theta = dtu0 + _div(grid, u)
    d1 = sum(grid.d(u[i] / u0, i + 1) for i in range(3))
    sqr = np.sqrt(np.maximum(r, 0.0))
    Fs = Fr = 0.0
    if bg.forcing is not None:
        Fs, Fr = S.value(bg.forcing.s), S.value(bg.forcing.r)
    Fr_over_r = _smooth_ratio(grid, np.broadcast_to(np.asarray(Fr, float), shape).copy(), r) \
        if np.any(np.asarray(Fr) != 0) else np.zeros(shape)
    Fs = np.broadcast_to(np.asarray(Fs, float), shape)

    # linear maps z -> components: b^mu = L[mu] . z (b^0 = u.b/u0)
    n = 5
    Lb = np.zeros((4, n) + shape)
    for j in range(3):
        Lb[0, 2 + j] = u[j] / u0
        Lb[1 + j, 2 + j] = 1.0
    ec = np.zeros((n,) + shape); ec[0] = 1.0
    ea = np.zeros((n,) + shape); ea[1] = 1.0
    eta = np.array([-1.0, 1.0, 1.0, 1.0])

    def outer(x, y):
        o = x[:, None] * y[None, :]
        return 0.5 * (o + np.swapaxes(o, 0, 1))

    gb = sum(eta[m] * outer(Lb[m], Lb[m]) for m in range(4))  # |b|_g^2
    E = 0.5 * (outer(ea, ea) / (gm - 1.0) + K * gb + outer(ec, ec))
    Q = E * d1
    Q = Q - (0.5 * outer(ec, ec) + gm / (2 * (gm - 1.0)) * outer(ea, ea) + 0.5 * (G + gm * r) * gb) * theta / u0
    b_ds = sum(Lb[m] * ds[m] for m in range(4))
    b_dr = sum(Lb[m] * dr[m] for m in range(4))
    Q = Q - outer(ec, b_ds) / u0
    # -(K) b_alpha b^mu d_mu u^alpha
    for al in range(4):
        b_du = sum(Lb[m] * du[al][m] for m in range(4))
        Q = Q - K * eta[al] * outer(Lb[al], b_du) / u0
    u_dr = u0 * dtr + _dot3(u, [grid.d(r, i) for i in (1, 2, 3)])
    Q = Q - gb * u_dr / u0
    Q = Q + (Gp / K) * outer(ec, b_dr) / u0 + (sqr / K) * outer(ea, b_dr) / u0
    # forcing of the background enters through D_t of the weights
    Q = Q + (0.5 * beta * Fr_over_r * outer(ec, ec)
             + (beta - 1.0) / (2 * (gm - 1.0)) * Fr_over_r * outer(ea, ea)
             + 0.5 * (Gp * Fs + np.asarray(Fr) + K * beta * Fr_over_r) * gb) / u0
    # remainder of the boundary-flux term after integrating by parts with 1/u0
    b_du0 = sum(Lb[m] * du[0][m] for m in range(4))
    Q = Q - sqr * outer(ea, b_du0) / (u0 * u0)
    Xf = sqr * outer(ea, Lb[0]) / u0
    return E, Q, Xf


def _gen_eig_absmax(E: np.ndarray, A: np.ndarray) -> np.ndarray:
    Em = np.moveaxis(E, (0, 1), (-2, -1))
    Am = np.moveaxis(A, (0, 1), (-2, -1))
    Lc = np.linalg.cholesky(Em)
    Li = np.linalg.inv(Lc)
    C = Li @ Am @ np.swapaxes(Li, -1, -2)
    ev = np.linalg.eigvalsh(0.5 * (C + np.swapaxes(C, -1, -2)))
    return np.max(np.abs(ev), axis=-1)


def basic_estimate_coefficients(bg: BgSeries) -> BasicEstimateCoefficients:
    E, Q, Xf = basic_estimate_forms(bg)
    return BasicEstimateCoefficients(C_Q=float(np.max(_gen_eig_absmax(E, Q))),
                                     kappa=float(np.max(_gen_eig_absmax(E, Xf))))


def scaled_unknowns(gamma: float, r, s_t, r_t, u_t):
    """z = (c, a, b1, b2, b3) for given perturbation fields (arrays)."""
    beta = 1.0 / (gamma - 1.0)
    rb2 = np.power(np.maximum(r, 0.0), beta / 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ra = np.where(r > 0, np.power(np.maximum(r, 1e-300), (beta - 1.0) / 2), 0.0 if beta > 1 else 1.0)
    return np.stack([rb2 * s_t, ra * r_t, rb2 * u_t[0], rb2 * u_t[1], rb2 * u_t[2]])


def quadratic_density(F: np.ndarray, z: np.ndarray) -> np.ndarray:
    return np.einsum("ij...,i...,j...->...", F, z, z)


# ---------------------------------------------------------------- moving domain
def moving_domain_ddt_check(times: np.ndarray, integrals: np.ndarray, rhs_mid: float) -> float:
    """|d/dt int f - rhs| at the middle sample, d/dt from a 5-point stencil."""
    times = np.asarray(times, dtype=float)
    if len(times) < 5:
        raise SeriesTooShort("at least 5 samples of int f are required")
    m = len(times) // 2
    idx = np.arange(m - 2, m + 3)
    w = _fd_weights_1(times[m], times[idx])
    return float(abs(np.dot(w, np.asarray(integrals)[idx]) - rhs_mid))


def _fd_weights_1(z, x):
    from .grid_norms import fornberg_weights
    return fornberg_weights(z, np.asarray(x, dtype=float), 1)
