"""Elliptic and div-curl operators, the decomposition of the spacetime
operator L1 into its good spatial part plus subcritical terms, estimate
constant fits, and the commutator sources of the differentiated system.

Background quantities and perturbations are time series (see
:mod:`vel.dynamics`); every time derivative is read off a series, every
spatial derivative is a finite difference.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from . import series as S
from . import order_calculus as oc
from .dynamics import BgSeries, LinearizedState, _dot3, dt_apply, linearized_series, linearized_sources
from .errors import FamilyTooSmall, GridDimTooLow, UnsupportedK, WrongFieldKind
from .grid_norms import Grid, weighted_sobolev_sq
from .thermo import gamma_of_entropy

OPS = ("L1_full", "L1_good", "L2_good", "L3_good")


def _T(x, n):
    return x.truncate(n) if isinstance(x, S.Series) else x


def _val(x):
    return S.value(x)


# ---------------------------------------------------------------- background tensors (values)
@dataclass
class _Bg0:
    """Time-slice values needed by the spatial operators."""

    r: np.ndarray
    K: np.ndarray
    u: list
    u0: np.ndarray
    gamma: float

    @property
    def H(self):
        return [[(1.0 if i == j else 0.0) - self.u[i] * self.u[j] / self.u0**2 for j in range(3)] for i in range(3)]

    @property
    def B(self):
        """B^{a i}: row 0 is u^i/u^0, rows 1..3 the identity."""
        one = np.ones_like(self.r)
        return [[self.u[i] / self.u0 for i in range(3)]] + [[one if a == i else 0.0 * one for i in range(3)]
                                                             for a in range(3)]


def _bg0(bg: BgSeries) -> _Bg0:
    s, r = _val(bg.s), _val(bg.r)
    u = [_val(c) for c in bg.u]
    u0 = np.sqrt(1.0 + _dot3(u, u))
    return _Bg0(r, gamma_of_entropy(s, bg.params) + r, u, u0, bg.params.gamma)


# ---------------------------------------------------------------- good operators
def L1_good(grid: Grid, bg: BgSeries, rt, b: float = 0.0):
    """(g-1)/(Gamma+r) H^{ij} (r d_i d_j r~ + 1/(g-1) d_i r d_j r~), plus b (g-1)/(Gamma+r) H^{ij} d_i r d_j r~."""
    if isinstance(rt, (list, tuple)) or np.ndim(rt) != grid.dim:
        raise WrongFieldKind("L1 acts on a scalar field")
    if b < 0:
        raise ValueError("b must be non-negative")
    z = _bg0(bg)
    g = z.gamma
    H = z.H
    dr = [grid.d(z.r, i) for i in (1, 2, 3)]
    drt = [grid.d(rt, i) for i in (1, 2, 3)]
    out = 0.0
    for i in range(3):
        for j in range(3):
            if i >= grid.dim or j >= grid.dim:
                continue
            d2 = grid.dmulti(rt, _alpha(grid, i, j))
            out = out + H[i][j] * (z.r * d2 + (1.0 / (g - 1.0) + b) * dr[i] * drt[j])
    return (g - 1.0) / z.K * out


def _alpha(grid: Grid, *idx) -> tuple:
    a = [0] * grid.dim
    for i in idx:
        a[i] += 1
    return tuple(a)


def _grad_u(grid: Grid, ut):
    """du[i][k] = d_i u~^k and ddu[i][j][k] = d_i d_j u~^k (zero along unresolved axes)."""
    zero = np.zeros(grid.shape)
    du = [[grid.d(ut[k], i + 1) if i < grid.dim else zero for k in range(3)] for i in range(3)]
    ddu = [[[grid.dmulti(ut[k], _alpha(grid, i, j)) if (i < grid.dim and j < grid.dim) else zero
             for k in range(3)] for j in range(3)] for i in range(3)]
    return du, ddu


def _check_vector(grid: Grid, ut):
    if np.ndim(ut) != grid.dim + 1 or np.shape(ut)[0] != 3:
        raise WrongFieldKind("L2/L3 act on a spatial vector field of shape (3, *grid)")


def L2_inner(grid: Grid, bg: BgSeries, ut) -> list:
    """Spatial bracket X_i = H^{jk}(r d_i d_j u~_k + d_i r d_j u~_k + 1/(g-1) d_j r d_i u~_k)."""
    _check_vector(grid, ut)
    z = _bg0(bg)
    g = z.gamma
    H = z.H
    dr = [grid.d(z.r, i) for i in (1, 2, 3)]
    du, ddu = _grad_u(grid, ut)
    X = []
    for i in range(3):
        acc = 0.0
        for j in range(3):
            for k in range(3):
                acc = acc + H[j][k] * (z.r * ddu[i][j][k] + dr[i] * du[j][k] + dr[j] * du[i][k] / (g - 1.0))
        X.append(acc)
    return X


def L3_inner(grid: Grid, bg: BgSeries, ut) -> list:
    """Y_i = H^{ml}(r d_l (d_m u~_i - d_i u~_m) + g/(g-1) d_l r (d_m u~_i - d_i u~_m))."""
    _check_vector(grid, ut)
    if grid.dim < 2:
        raise GridDimTooLow("the curl operator needs a 2-D grid")
    z = _bg0(bg)
    g = z.gamma
    H = z.H
    dr = [grid.d(z.r, i) for i in (1, 2, 3)]
    du, ddu = _grad_u(grid, ut)
    Y = []
    for i in range(3):
        acc = 0.0
        for m in range(3):
            for l in range(3):
                curl = du[m][i] - du[i][m]
                dcurl = ddu[l][m][i] - ddu[l][i][m]
                acc = acc + H[m][l] * (z.r * dcurl + g / (g - 1.0) * dr[l] * curl)
        Y.append(acc)
    return Y


def _lift_B(z: _Bg0, X: list) -> list:
    Bm = z.B
    c = (z.gamma - 1.0) / z.K
    return [c * sum(Bm[a][i] * X[i] for i in range(3)) for a in range(4)]


def L2_good(grid: Grid, bg: BgSeries, ut) -> list:
    return _lift_B(_bg0(bg), L2_inner(grid, bg, ut))


def L3_good(grid: Grid, bg: BgSeries, ut) -> list:
    return _lift_B(_bg0(bg), L3_inner(grid, bg, ut))


def div_curl_pairing_residual(grid: Grid, bg: BgSeries, ut) -> float:
    """r^b G(L, L) for L = (L2 + L3) u~ against the expanded bracket form."""
    z = _bg0(bg)
    g = z.gamma
    beta = 1.0 / (g - 1.0)
    L2, L3 = L2_good(grid, bg, ut), L3_good(grid, bg, ut)
    L = [L2[a] + L3[a] for a in range(4)]
    u4 = [z.u0, *z.u]
    eta = (-1.0, 1.0, 1.0, 1.0)
    Gl = [[(eta[a] if a == b else 0.0) + 2.0 * eta[a] * eta[b] * u4[a] * u4[b] for b in range(4)] for a in range(4)]
    lhs = sum(Gl[a][b] * L[a] * L[b] for a in range(4) for b in range(4))
    X, Y = L2_inner(grid, bg, ut), L3_inner(grid, bg, ut)
    H = z.H
    W = [X[i] + Y[i] for i in range(3)]
    rhs = ((g - 1.0) / z.K) ** 2 * sum(H[i][a] * W[i] * W[a] for i in range(3) for a in range(3))
    rb = np.power(np.maximum(z.r, 0.0), beta)
    return float(np.max(np.abs(rb * (lhs - rhs))) / max(1.0, float(np.max(np.abs(rb * lhs)))))


def apply_elliptic(op: str, grid: Grid, bg: BgSeries, field, b: float = 0.0, lin: tuple | None = None):
    if op not in OPS:
        raise ValueError(f"op must be one of {OPS}")
    if op == "L1_good":
        return L1_good(grid, bg, field, b)
    if op == "L2_good":
        return L2_good(grid, bg, field)
    if op == "L3_good":
        return L3_good(grid, bg, field)
    return S.value(L1_full(grid, bg, field if isinstance(field, S.Series) else lin[1]))


# ---------------------------------------------------------------- L1 and its decomposition
def _Pi(u4, a, b):
    eta = (-1.0, 1.0, 1.0, 1.0)
    return (eta[a] if a == b else 0.0) + u4[a] * u4[b]


def L1_full(grid: Grid, bg: BgSeries, rt: S.Series):
    """Spacetime operator (g-1)/(Gamma+r) Pi^{mn}(r d_m d_n r~ + 1/(g-1) d_m r d_n r~).

    ``rt`` is the perturbation series (order >= 2: d_t^2 r~ enters); the
    result is returned at order rt.order - 2.
    """
    n = rt.order - 2
    if n < 0:
        raise ValueError("r~ series of order >= 2 required")
    g = bg.params.gamma
    b = bg.truncate(n + 1)
    u4 = [_T(c, n) for c in b.u4]
    r = b.r
    K = _T(gamma_of_entropy(b.s, bg.params) + r, n)

    def d(f, m, order):
        return _T(f.derivative(), order) if m == 0 else grid.d(_T(f, order), m)

    drt = [d(rt, m, n + 1) for m in range(4)]
    d2 = [[d(drt[m], q, n) for q in range(4)] for m in range(4)]
    dr = [d(r, m, n) for m in range(4)]
    acc = 0.0
    for m in range(4):
        for q in range(4):
            P = _Pi(u4, m, q)
            acc = acc + P * (_T(r, n) * d2[m][q] + dr[m] * _T(drt[q], n) / (g - 1.0))
    return (g - 1.0) / K * acc


def _black_setup(grid: Grid, bg: BgSeries, rt: S.Series):
    n = rt.order - 2
    b = bg.truncate(n + 2)
    T = lambda x, k=n: _T(x, k)
    r = b.r
    z = dict(n=n, b=b, T=T, r=r, u=list(b.u), u0=b.u0,
             K=T(gamma_of_entropy(b.s, bg.params) + r),
             Dr=dt_apply(rt, b), Dtr_bg=dt_apply(r, b))
    z["D2r"] = dt_apply(z["Dr"], b)
    return z


def L1_black_terms(grid: Grid, bg: BgSeries, rt: S.Series, printed: bool = False) -> dict:
    """Subcritical remainder L1 - L1_good, term by term (order rt.order - 2).

    With V = u/u^0 and D = D_t,
    Pi^{mn} d_m d_n = -d_t^2 + Laplacian + D^2 - (D u^n) d_n and
    -d_t^2 + V^i V^j d_i d_j = -(d_t - V.d)(D/u^0) + (d_t V^j - V.d V^j) d_j,
    which leaves only terms carrying a D_t or a first derivative of r~.
    ``printed=True`` returns the printed grouping instead; it does not close.
    """
    if printed:
        return _printed_black_terms(grid, bg, rt)
    z = _black_setup(grid, bg, rt)
    g = bg.params.gamma
    T, b, n = z["T"], z["b"], z["n"]
    u, u0, K = z["u"], z["u0"], z["K"]
    uu, U0, R = [T(c) for c in u], T(u0), T(z["r"])
    Dr, D2r, DR = z["Dr"], z["D2r"], T(z["Dtr_bg"])
    V = [c / u0 for c in u]
    c1 = (g - 1.0) / K
    d_rt = [grid.d(T(rt), i) for i in (1, 2, 3)]
    d_r = [grid.d(T(z["r"]), i) for i in (1, 2, 3)]
    Du4 = [T(dt_apply(c, b)) for c in [u0, *u]]
    dmu_rt = [T(rt.derivative()), *d_rt]
    q = Dr / u0                                              # order n+1
    dq = [grid.d(T(q), i) for i in (1, 2, 3)]
    Vn = [T(c) for c in V]
    trans_V = [T(V[j].derivative()) - sum(Vn[i] * grid.d(T(V[j]), i + 1) for i in range(3)) for j in range(3)]
    terms = {}
    terms["D r D r~"] = (U0 * U0 - 1.0) * DR * T(Dr) / (K * U0 * U0)
    terms["D r u.d r~"] = DR * _dot3(uu, d_rt) / (K * U0 * U0)
    terms["u.d r D r~"] = _dot3(uu, d_r) * T(Dr) / (K * U0 * U0)
    terms["r D^2 r~"] = c1 * R * T(D2r)
    terms["r Du.d r~"] = -c1 * R * sum(Du4[m] * dmu_rt[m] for m in range(4))
    terms["r d(D r~ / u0)"] = -c1 * R * (T(q.derivative()) - _dot3(Vn, dq))
    terms["r (d_t V - V.dV).d r~"] = c1 * R * _dot3(trans_V, d_rt)
    return terms


def _printed_black_terms(grid: Grid, bg: BgSeries, rt: S.Series) -> dict:
    z = _black_setup(grid, bg, rt)
    g = bg.params.gamma
    T = z["T"]
    u, u0, K, b = z["u"], z["u0"], z["K"], z["b"]
    uu, U0, R = [T(c) for c in u], T(u0), T(z["r"])
    Dr, D2r = z["Dr"], z["D2r"]
    Du0 = dt_apply(u0, b)
    Du = [dt_apply(c, b) for c in u]
    Pi00 = U0 * U0 - 1.0
    dt_rt = T(rt.derivative())
    d_rt = [grid.d(T(rt), i) for i in (1, 2, 3)]
    d_r = [grid.d(T(z["r"]), i) for i in (1, 2, 3)]
    d_Dr = [grid.d(T(Dr), i) for i in (1, 2, 3)]
    d_inv_u0 = [grid.d(T(1.0 / u0), i) for i in (1, 2, 3)]
    d_uj_u0 = [[grid.d(T(u[j] / u0), i) for j in range(3)] for i in range(3)]
    c1 = (g - 1.0) / K
    grp = (R * T(D2r) / (U0 * U0)
           - 2.0 * R * _dot3(uu, d_Dr) / (U0 * U0)
           + 2.0 * R * sum(uu[i] * d_uj_u0[i][j] * d_rt[j] for i in range(3) for j in range(3)) / U0
           - R * T(Du0) * dt_rt / (U0 * U0)
           - R * _dot3([T(c) for c in Du], d_rt) / (U0 * U0))
    return {
        "Dt r u.d r~": T(z["Dtr_bg"]) * _dot3(uu, d_rt) / (K * U0 * U0),
        "group": c1 * grp,
        "Pi00 dt r D_t r~": Pi00 * T(z["r"].derivative()) * T(Dr) / (K * U0),
        "r u.d D_t r~": 2.0 * c1 * R * _dot3(uu, d_Dr),
        "u u0 r [..]": 2.0 * c1 * R * U0 * sum(
            uu[i] * (T(Dr) * d_inv_u0[i] - sum(d_uj_u0[i][j] * d_rt[j] for j in range(3))) for i in range(3)),
        "Pi i0 d_i r D_t r~": U0 * _dot3(uu, d_r) * T(Dr) / (K * U0),
    }


def decomposition_residual(grid: Grid, bg: BgSeries, lin: LinearizedState, printed: bool = False) -> np.ndarray:
    """L1 r~ - L1_good r~ - (black terms), pointwise, with d_t of r~ from the dynamics."""
    ls = linearized_series(bg, lin, 2)
    rt = ls[1]
    full = L1_full(grid, bg, rt)
    good = L1_good(grid, bg, lin.r)
    black = sum(L1_black_terms(grid, bg, rt, printed).values())
    return S.value(full) - good - S.value(black)


# ---- symbolic certification of the black terms
R_, U_, S_ = oc.VarKind.R, oc.VarKind.U, oc.VarKind.S


def _chain(ops: list, start: oc.Term, k: int) -> oc.TermSum:
    ts = oc.TermSum((start,))
    for op in ops:
        ts = oc.apply_op_to_sum(op, ts, k)
    return ts


BLACK_TERM_SCHEMATICS = {
    # operations applied right-to-left to r~; background D_t r carries a factor r
    "D r D r~": [oc.Op.DT, oc.Op.MUL_R],
    "D r u.d r~": [oc.Op.PARTIAL, oc.Op.MUL_R],
    "u.d r D r~": [oc.Op.DT],
    "r D^2 r~": [oc.Op.DT, oc.Op.DT, oc.Op.MUL_R],
    "r Du.d r~": [oc.Op.PARTIAL, oc.Op.MUL_R],
    "r d(D r~ / u0)": [oc.Op.DT, oc.Op.PARTIAL, oc.Op.MUL_R],
    "r (d_t V - V.dV).d r~": [oc.Op.PARTIAL, oc.Op.MUL_R],
}


def certify_black_terms(k: int = 1) -> dict[str, Fraction]:
    """Minimum order of each black term's schematic expansion at level k."""
    out = {}
    for name, ops in BLACK_TERM_SCHEMATICS.items():
        out[name] = _chain(ops, oc.Term(0, 0, R_), k).min_order(k).value
    return out


# ---------------------------------------------------------------- estimate fits
def localization_constant(grid: Grid, r: np.ndarray, band: float = 0.05) -> float:
    """Smallest A with |d' r| <= A and |d_n r - 1| <= A within ``band`` of the vacuum.

    d_n is the derivative along the inward normal, d' the tangential ones.
    """
    ax = grid.dim - 1
    dist = grid.distance()
    near = dist <= band * grid.axes[ax].length
    dn = grid.diff(r, ax)
    x = grid.coords[ax]
    sign = np.where(x < 0.5 * grid.axes[ax].length, 1.0, -1.0)
    A = float(np.max(np.abs(sign * dn - 1.0)[near]))
    for t in range(ax):
        A = max(A, float(np.max(np.abs(grid.diff(r, t))[near])))
    return A


@dataclass
class FitReport:
    ratios: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def constant(self) -> float:
        return float(np.max(self.ratios))


def elliptic_r_sides(grid: Grid, bg: BgSeries, rt: np.ndarray) -> tuple[float, float]:
    """lhs = |r~|_{H^{2, b/2+1/2}}, rhs = |L1_good r~|_{H^{0, b/2-1/2}} + |r~|_{L^2(r^{b-1})}."""
    beta = 1.0 / (bg.params.gamma - 1.0)
    r = _val(bg.r)
    lhs = np.sqrt(weighted_sobolev_sq(grid, rt, 2, beta / 2 + 0.5, r))
    L = L1_good(grid, bg, rt)
    rhs = np.sqrt(weighted_sobolev_sq(grid, L, 0, beta / 2 - 0.5, r)) + \
        np.sqrt(weighted_sobolev_sq(grid, rt, 0, beta / 2 - 0.5, r))
    return float(lhs), float(rhs)


def _g_sq(u4):
    eta = (-1.0, 1.0, 1.0, 1.0)

    def sq(X):
        dot = sum(eta[a] * X[a] * X[a] for a in range(4))
        ux = sum(eta[a] * u4[a] * X[a] for a in range(4))
        return dot + 2.0 * ux * ux
    return sq


def div_curl_sides(grid: Grid, bg: BgSeries, ut: np.ndarray) -> tuple[float, float]:
    """lhs = |u~|_{H^{2, b/2+1}}, rhs = |(L2+L3) u~|_{H^{0, b/2}} + |u~|_{L^2(r^b)}, G-norms."""
    z = _bg0(bg)
    beta = 1.0 / (z.gamma - 1.0)
    u4 = [z.u0, *z.u]
    ut0 = _dot3(z.u, ut) / z.u0
    comps = [ut0, ut[0], ut[1], ut[2]]
    sq = _g_sq(u4)
    lhs = np.sqrt(weighted_sobolev_sq(grid, comps, 2, beta / 2 + 1.0, z.r, sq))
    L2, L3 = L2_good(grid, bg, ut), L3_good(grid, bg, ut)
    L = [L2[a] + L3[a] for a in range(4)]
    rhs = np.sqrt(weighted_sobolev_sq(grid, L, 0, beta / 2, z.r, sq)) + \
        np.sqrt(weighted_sobolev_sq(grid, comps, 0, beta / 2, z.r, sq))
    return float(lhs), float(rhs)


def estimate_constant_fit(sides, grid: Grid, bg: BgSeries, family: list) -> FitReport:
    """sup over the family of lhs/rhs; zero members are rejected."""
    if len(family) < 50:
        raise FamilyTooSmall(f"family of {len(family)} < 50 members")
    L, R = [], []
    for f in family:
        if not np.any(np.asarray(f) != 0):
            raise ValueError("zero member in test family")
        a, b = sides(grid, bg, f)
        L.append(a)
        R.append(b)
    L, R = np.array(L), np.array(R)
    return FitReport(L / R, L, R)


def smooth_family(grid: Grid, n: int, seed: int, vector: bool = False) -> list:
    """Random smooth fields: low-degree polynomials in the bounded direction
    times low Fourier modes in the periodic one."""
    rng = np.random.default_rng(seed)
    out = []
    coords = grid.coords
    for _ in range(n):
        comps = []
        for _c in range(3 if vector else 1):
            f = np.zeros(grid.shape)
            for _t in range(4):
                term = np.full(grid.shape, rng.normal())
                for ax, x in zip(grid.axes, coords):
                    xi = x / ax.length
                    if ax.kind == "periodic":
                        q = rng.integers(0, 3)
                        term = term * np.cos(2 * np.pi * q * xi + rng.uniform(0, 2 * np.pi))
                    else:
                        p = rng.integers(0, 5)
                        term = term * (xi - rng.uniform(0, 1)) ** p
                f += term
            comps.append(f)
        out.append(np.stack(comps) if vector else comps[0])
    return out


# ---------------------------------------------------------------- higher-order sources
@dataclass
class HigherSources:
    B: object
    C: tuple
    k: int


def _commutator(bg: BgSeries, f: S.Series, j: int, mu: int):
    """[D_t^j, d_mu] f, order reduced by j + 1."""
    grid = bg.grid

    def dmu(x):
        return x.derivative() if mu == 0 else grid.d(x.truncate(x.order - 1), mu)

    a = dmu(f)
    for _ in range(j):
        a = dt_apply(a, bg)
    b_ = f
    for _ in range(j):
        b_ = dt_apply(b_, bg)
    return a - dmu(b_)


def _dtn(bg: BgSeries, f, j: int):
    for _ in range(j):
        f = dt_apply(f, bg)
    return f


def _dmu(grid: Grid, f: S.Series, mu: int):
    return f.derivative() if mu == 0 else grid.d(f.truncate(f.order - 1), mu)


def higher_sources(bg: BgSeries, lin: LinearizedState, k: int = 1, lin_ser: tuple | None = None,
                   printed: bool = False) -> HigherSources:
    """Sources B_{2k}, C_{2k} of the D_t^{2k}-differentiated r~ and u~ equations.

    Leibniz expansion with binomial weights; the (g-1) r d(D_t^i u~) terms
    enter with the factor (g-1) and a minus sign. ``printed=True`` uses unit
    weights, a plus sign and no (g-1) factor there, for comparison.
    """
    if k not in (0, 1):
        raise UnsupportedK("numerical higher sources are available for k = 0, 1")
    grid, params = bg.grid, bg.params
    gm = params.gamma
    cb = (lambda N, i: 1) if printed else comb
    sg, gf = (1.0, 1.0) if printed else (-1.0, gm - 1.0)
    N = 2 * k
    ls = lin_ser if lin_ser is not None else linearized_series(bg, lin, N + 1)
    s_t, r_t, u_t = ls
    order = min(x.order for x in (s_t, r_t, *u_t))
    b = bg.truncate(order + 1)
    u0 = b.u0
    ut4 = [_dot3(b.u, u_t) / u0, *u_t]
    f, g, h = linearized_sources(grid, params, b, s_t, r_t, u_t)
    if k == 0:
        return HigherSources(B=S.value(g), C=tuple(S.value(x) for x in h), k=0)
    r = b.r
    K = gamma_of_entropy(b.s, params) + r
    u4 = b.u4
    P = [[_Pi(u4, a, m) / K for m in range(4)] for a in range(4)]
    # B_{2k}
    Bv = _dtn(b, g, N)
    for i in range(N):
        Dui = [_dtn(b, c, i) for c in ut4]
        Dr = _dtn(b, r, N - i)
        for m in range(4):
            Bv = Bv - cb(N, i) * Dui[m] * (_dmu(grid, Dr, m) + _commutator(b, r, N - i, m))
            Bv = Bv + sg * gf * cb(N, i) * Dr * _dmu(grid, Dui[m], m)
    for i in range(1, N + 1):
        Dr = _dtn(b, r, N - i)
        for m in range(4):
            Bv = Bv - (gm - 1.0) * cb(N, i) * Dr * _commutator(b, ut4[m], i, m)
    # C_{2k}
    Cv = []
    for a in range(4):
        acc = _dtn(b, h[a], N)
        for i in range(N):
            for m in range(4):
                acc = acc - cb(N, i) * _dtn(b, P[a][m], N - i) * _dmu(grid, _dtn(b, r_t, i), m)
        for i in range(1, N + 1):
            for m in range(4):
                acc = acc - cb(N, i) * _dtn(b, P[a][m], N - i) * _commutator(b, r_t, i, m)
        Cv.append(acc)
    return HigherSources(B=Bv, C=tuple(Cv), k=k)


def system6_residual(bg: BgSeries, lin: LinearizedState, k: int = 1, printed: bool = False) -> tuple[np.ndarray, list]:
    """Residuals of the D_t^{2k}-differentiated r~ and u~ equations with the sources above."""
    grid, params = bg.grid, bg.params
    gm = params.gamma
    N = 2 * k
    ls = linearized_series(bg, lin, N + 1)
    hs = higher_sources(bg, lin, k, ls, printed)
    s_t, r_t, u_t = ls
    b = bg.truncate(N + 2)
    u0 = b.u0
    ut4 = [_dot3(b.u, u_t) / u0, *u_t]
    DNr = _dtn(b, r_t, N)
    DNu = [_dtn(b, c, N) for c in ut4]
    r = b.r
    K = gamma_of_entropy(b.s, params) + r
    lhs_r = dt_apply(DNr, b) + sum(DNu[m] * _dmu(grid, r, m) for m in range(4)) \
        + (gm - 1.0) * r * sum(_dmu(grid, DNu[m], m) for m in range(4))
    res_r = S.value(lhs_r - hs.B)
    u4 = b.u4
    res_u = []
    for a in range(4):
        lhs = dt_apply(DNu[a], b) + sum(_Pi(u4, a, m) / K * _dmu(grid, DNr, m) for m in range(4))
        res_u.append(S.value(lhs - hs.C[a]))
    return res_r, res_u
