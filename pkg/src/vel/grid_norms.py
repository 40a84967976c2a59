"""Grids, finite differences, degenerate-weight quadrature and weighted norms.

Spatial index convention: physical spatial indices are 1, 2, 3.  A 1-D grid
resolves x^1, a 2-D grid resolves (x^1, x^2); derivatives along unresolved
directions are zero.  Fields are numpy arrays with the grid axes last, so a
vector field has shape ``(3, *grid.shape)``.  Every differentiation and
integration routine also accepts :class:`vel.series.Series` and works
coefficient by coefficient.

Quadrature of r^a g on an interval with a vacuum end uses product
integration: the domain is cut into panels of four intervals, the smooth part
(r/d)^a g is replaced by its degree-4 interpolant, and the singular factor
d^a (d the distance-like function vanishing at the vacuum ends) is integrated
exactly by Gauss-Jacobi rules.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi, roots_legendre

from . import series as S
from .errors import MissingConvectivePowers, ResolutionTooLow


# ---------------------------------------------------------------- stencils
def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Weights for derivatives 0..m at z from values at nodes x (Fornberg 1988)."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def _centered_width(order: int) -> int:
    return 5 if order <= 2 else 7


# ---------------------------------------------------------------- axes
@dataclass(frozen=True)
class Axis:
    """One grid direction.

    kind: "periodic" (n equispaced nodes on [0, length)) or "interval"
    (n intervals, n+1 nodes on [0, length]).  ``vacuum`` marks the interval
    ends where r vanishes: "left", "both" or "none".  ``stretch`` in [0, 1)
    clusters nodes toward the vacuum ends through a sine map.
    """

    kind: str
    n: int
    length: float = 1.0
    vacuum: str = "none"
    stretch: float = 0.0

    def __post_init__(self):
        if self.kind not in ("periodic", "interval"):
            raise ValueError("axis kind must be 'periodic' or 'interval'")
        if self.vacuum not in ("left", "both", "none"):
            raise ValueError("vacuum must be 'left', 'both' or 'none'")
        if self.kind == "periodic" and self.vacuum != "none":
            raise ValueError("periodic axes have no vacuum end")
        if self.kind == "interval" and self.n % 4:
            raise ValueError("interval axes need a multiple of 4 intervals")
        if not 0 <= self.stretch < 1:
            raise ValueError("stretch must lie in [0, 1)")

    @property
    def npts(self) -> int:
        return self.n if self.kind == "periodic" else self.n + 1

    @cached_property
    def nodes(self) -> np.ndarray:
        L = self.length
        if self.kind == "periodic":
            return np.arange(self.n) * (L / self.n)
        xi = np.linspace(0.0, 1.0, self.n + 1)
        s = self.stretch
        if s == 0:
            return L * xi
        if self.vacuum == "left":
            x = xi - s * np.sin(np.pi * xi) / np.pi
            x = x / x[-1]
        else:
            x = xi - s * np.sin(2 * np.pi * xi) / (2 * np.pi)
        return L * x

    @property
    def h(self) -> float:
        return self.length / self.n

    def distance(self, x: np.ndarray | None = None) -> np.ndarray:
        """The function d that vanishes simply at the vacuum ends."""
        x = self.nodes if x is None else x
        if self.vacuum == "left":
            return x.copy()
        if self.vacuum == "both":
            return x * (self.length - x) / self.length
        return np.ones_like(x)

    def distance_slope(self, x: np.ndarray) -> np.ndarray:
        if self.vacuum == "left":
            return np.ones_like(x)
        if self.vacuum == "both":
            return (self.length - 2 * x) / self.length
        return np.zeros_like(x)

    def vacuum_nodes(self) -> list[int]:
        if self.vacuum == "left":
            return [0]
        if self.vacuum == "both":
            return [0, self.n]
        return []

    # -------------------------------------------------- differentiation
    def diff_matrix(self, order: int) -> sp.csr_matrix:
        return _diff_matrix(self, order)

    # -------------------------------------------------- quadrature
    def weights(self, a: float = 0.0) -> np.ndarray:
        """W with  int d^a g dx  ~  sum W g  for smooth g."""
        return _quad_weights(self, float(a))


_DIFF_CACHE: dict = {}
_QUAD_CACHE: dict = {}


def _diff_matrix(ax: Axis, order: int) -> sp.csr_matrix:
    key = (ax, order)
    if key in _DIFF_CACHE:
        return _DIFF_CACHE[key]
    if not 1 <= order <= 4:
        raise ValueError("derivative order must be between 1 and 4")
    x = ax.nodes
    N = ax.npts
    wc = _centered_width(order)
    ws = order + 4
    need = max(8, (wc if ax.kind == "periodic" else ws) + 1)
    if N < need:
        raise ResolutionTooLow(f"{N} nodes < {need} required for derivative order {order}")
    rows, cols, vals = [], [], []
    half = wc // 2
    if ax.kind == "periodic":
        L = ax.length
        for i in range(N):
            idx = np.arange(i - half, i + half + 1)
            xs = x[idx % N] + np.floor_divide(idx, N) * L
            w = fornberg_weights(x[i], xs, order)
            rows += [i] * len(idx)
            cols += list(idx % N)
            vals += list(w)
    else:
        for i in range(N):
            if i - half >= 0 and i + half <= N - 1:
                idx = np.arange(i - half, i + half + 1)
            elif i - half < 0:
                idx = np.arange(0, ws)
            else:
                idx = np.arange(N - ws, N)
            w = fornberg_weights(x[i], x[idx], order)
            rows += [i] * len(idx)
            cols += list(idx)
            vals += list(w)
    M = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    _DIFF_CACHE[key] = M
    return M


def _lagrange_basis(xp: np.ndarray, xq: np.ndarray) -> np.ndarray:
    """Values of the Lagrange basis on nodes xp at points xq, shape (len xq, len xp)."""
    out = np.ones((len(xq), len(xp)))
    for j in range(len(xp)):
        for k in range(len(xp)):
            if k != j:
                out[:, j] *= (xq - xp[k]) / (xp[j] - xp[k])
    return out


def _quad_weights(ax: Axis, a: float) -> np.ndarray:
    key = (ax, a)
    if key in _QUAD_CACHE:
        return _QUAD_CACHE[key]
    if ax.kind == "periodic":
        W = np.full(ax.n, ax.length / ax.n)
        _QUAD_CACHE[key] = W
        return W
    if ax.vacuum != "none" and a <= -1:
        raise ValueError("weight exponent must exceed -1")
    x = ax.nodes
    W = np.zeros(ax.npts)
    nq = 12
    tl, wl = roots_legendre(nq)
    L = ax.length
    for p in range(ax.n // 4):
        idx = np.arange(4 * p, 4 * p + 5)
        xa, xb = x[idx[0]], x[idx[-1]]
        left_sing = ax.vacuum in ("left", "both") and idx[0] == 0 and a != 0
        right_sing = ax.vacuum == "both" and idx[-1] == ax.n and a != 0
        if left_sing:
            t, w = roots_jacobi(nq, 0.0, a)
            xq = xa + (xb - xa) * (1 + t) / 2
            # d^a = x^a * smooth;  x^a = ((xb-xa)/2)^a (1+t)^a is in the rule
            fac = ((xb - xa) / 2) ** (a + 1)
            smooth = (ax.distance(xq) / xq) ** a if ax.vacuum == "both" else np.ones_like(xq)
            wq = w * fac * smooth
        elif right_sing:
            t, w = roots_jacobi(nq, a, 0.0)
            xq = xa + (xb - xa) * (1 + t) / 2
            fac = ((xb - xa) / 2) ** (a + 1)
            smooth = (xq / L) ** a
            wq = w * fac * smooth
        else:
            xq = xa + (xb - xa) * (1 + tl) / 2
            wq = wl * (xb - xa) / 2 * ax.distance(xq) ** a
        W[idx] += _lagrange_basis(x[idx], xq).T @ wq
    _QUAD_CACHE[key] = W
    return W


# ---------------------------------------------------------------- grids
@dataclass(frozen=True)
class Grid:
    """Tensor-product grid over one or two axes (x^1, then x^2)."""

    axes: tuple[Axis, ...]

    @classmethod
    def interval(cls, n: int, length: float = 1.0, vacuum: str = "left", stretch: float = 0.0) -> "Grid":
        return cls((Axis("interval", n, length, vacuum, stretch),))

    @classmethod
    def periodic(cls, n: int, length: float = 1.0) -> "Grid":
        return cls((Axis("periodic", n, length),))

    @classmethod
    def slab(cls, n1: int, n2: int, length1: float = 1.0, length2: float = 1.0,
             vacuum: str = "both", stretch: float = 0.0) -> "Grid":
        return cls((Axis("periodic", n1, length1), Axis("interval", n2, length2, vacuum, stretch)))

    @classmethod
    def torus(cls, n1: int, n2: int, length1: float = 1.0, length2: float = 1.0) -> "Grid":
        return cls((Axis("periodic", n1, length1), Axis("periodic", n2, length2)))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.npts for a in self.axes)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*[a.nodes for a in self.axes], indexing="ij"))

    @property
    def h(self) -> float:
        return max(a.h for a in self.axes)

    @property
    def has_vacuum(self) -> bool:
        return any(a.vacuum != "none" for a in self.axes)

    def zeros(self, *lead) -> np.ndarray:
        return np.zeros(tuple(lead) + self.shape)

    # -------------------------------------------------- derivatives
    def _apply(self, M: sp.csr_matrix, f: np.ndarray, gaxis: int) -> np.ndarray:
        f = np.asarray(f)
        ax = f.ndim - self.dim + gaxis
        moved = np.moveaxis(f, ax, 0)
        sh = moved.shape
        out = M @ moved.reshape(sh[0], -1)
        return np.moveaxis(np.asarray(out).reshape(sh), 0, ax)

    def diff(self, f, axis: int, order: int = 1):
        """Derivative of given order along grid axis ``axis`` (0-based)."""
        M = self.axes[axis].diff_matrix(order)
        return S.spatial(lambda g: self._apply(M, g, axis), f)

    def d(self, f, i: int, order: int = 1):
        """Partial derivative along physical spatial index i in {1,2,3}."""
        if i - 1 < self.dim:
            return self.diff(f, i - 1, order)
        return f * 0.0

    def dmulti(self, f, alpha: tuple[int, ...]):
        """Mixed derivative with multi-index alpha over the grid axes."""
        out = f
        for ax, a in enumerate(alpha):
            if a:
                out = self.diff(out, ax, a)
        return out

    def multi_indices(self, j: int):
        """All multi-indices of total order exactly j over the grid axes."""
        return [al for al in itertools.product(range(j + 1), repeat=self.dim) if sum(al) == j]

    # -------------------------------------------------- quadrature
    def distance(self) -> np.ndarray:
        out = np.ones(self.shape)
        for k, ax in enumerate(self.axes):
            out = out * ax.distance(self.coords[k])
        return out

    def weights(self, a: float = 0.0) -> np.ndarray:
        Ws = [ax.weights(a) for ax in self.axes]
        W = Ws[0]
        for w in Ws[1:]:
            W = np.multiply.outer(W, w)
        return W

    def integrate(self, g):
        """Plain integral of a field (array or series)."""
        W = self.weights(0.0)
        if isinstance(g, S.Series):
            return np.array([np.sum(W * c) for c in g.c])
        return float(np.sum(W * g))

    def rho(self, r, check: bool = True):
        """Smooth quotient r/d, with the slope ratio at vacuum nodes."""
        if isinstance(r, S.Series):
            return S.Series(np.stack([self._rho(c, check and n == 0) for n, c in enumerate(r.c)]))
        return self._rho(np.asarray(r, dtype=float), check)

    def _rho(self, r: np.ndarray, check: bool) -> np.ndarray:
        d = self.distance()
        out = np.empty_like(r)
        np.divide(r, d, out=out, where=d != 0)
        for k, ax in enumerate(self.axes):
            for j in ax.vacuum_nodes():
                sl = [slice(None)] * self.dim
                sl[k] = j
                sl = tuple(sl)
                if check and np.max(np.abs(r[sl])) > 1e-10 * max(1.0, np.max(np.abs(r))):
                    raise ValueError("r must vanish at a declared vacuum end")
                slope = self.diff(r, k, 1)[sl]
                dslope = ax.distance_slope(np.array([ax.nodes[j]]))[0]
                other = np.ones(self.shape)
                for k2, ax2 in enumerate(self.axes):
                    if k2 != k:
                        other = other * ax2.distance(self.coords[k2])
                out[sl] = slope / (dslope * other[sl])
        if check and np.any(out <= 0):
            raise ValueError("r must be positive inside the domain")
        return out

    def integrate_weighted(self, g, r, a: float):
        """Integral of r^a g, exact treatment of the degenerate factor."""
        if a == 0:
            return self.integrate(g)
        if not self.has_vacuum:
            return self.integrate(S.power(r, a) * g)
        W = self.weights(a)
        rho = self.rho(r)
        f = S.power(rho, a) * g
        if isinstance(f, S.Series):
            return np.array([np.sum(W * c) for c in f.c])
        return float(np.sum(W * f))


# ---------------------------------------------------------------- norms
def weighted_sobolev_sq(grid: Grid, f, j: int, sigma: float, r, vector_sq=None):
    """Squared H^{j,sigma} norm: sum over |alpha|<=j of int r^{2 sigma} |d^alpha f|^2.

    ``f`` is a scalar field, or a list of component fields; ``vector_sq``
    maps a list of differentiated components to the pointwise squared size.
    """
    if sigma <= -0.5:
        raise ValueError("weight exponent sigma must exceed -1/2")
    total = 0.0
    comps = f if isinstance(f, (list, tuple)) else None
    for q in range(j + 1):
        for al in grid.multi_indices(q):
            if comps is None:
                df = grid.dmulti(f, al)
                dens = df * df
            else:
                dcs = [grid.dmulti(c, al) for c in comps]
                dens = vector_sq(dcs) if vector_sq is not None else sum(c * c for c in dcs)
            total = total + grid.integrate_weighted(dens, r, 2 * sigma)
    return total


def weighted_sobolev_norm(grid: Grid, f, j: int, sigma: float, r, vector_sq=None) -> float:
    return float(np.sqrt(weighted_sobolev_sq(grid, f, j, sigma, r, vector_sq)))


def g_sq_components(u4: list):
    """Pointwise |X|_G^2 for X given as four components, u4 the background."""
    def sq(X):
        dot = -X[0] * X[0] + X[1] * X[1] + X[2] * X[2] + X[3] * X[3]
        ux = -u4[0] * X[0] + u4[1] * X[1] + u4[2] * X[2] + u4[3] * X[3]
        return dot + 2.0 * ux * ux
    return sq


def ginv_sq_twoform(u4: list):
    """Pointwise G^{ac}G^{bd} w_ab w_cd for a 2-form given as a 4x4 nested list."""
    def sq(w):
        eta = (-1.0, 1.0, 1.0, 1.0)
        Gi = [[(eta[a] if a == b else 0.0) + 2.0 * u4[a] * u4[b] for b in range(4)] for a in range(4)]
        # contract: (Gi w Gi)_{cd} w_cd with w antisymmetric
        total = 0.0
        for a in range(4):
            for b in range(4):
                if a == b:
                    continue
                Wab = w[a][b]
                inner = 0.0
                for c in range(4):
                    for d in range(4):
                        if c == d:
                            continue
                        inner = inner + Gi[a][c] * Gi[b][d] * w[c][d]
                total = total + Wab * inner
        return total
    return sq


@dataclass(frozen=True)
class Weights:
    """Exponents of r used by the energies for a given gamma."""

    gamma: float

    @property
    def base(self) -> float:
        """(2-gamma)/(gamma-1): the weight on r~^2 in the base energy."""
        return (2.0 - self.gamma) / (self.gamma - 1.0)

    @property
    def half_r(self) -> float:
        """(2-gamma)/(2(gamma-1)): H^{2k} weight exponent on r~."""
        return self.base / 2.0

    @property
    def half_u(self) -> float:
        return self.base / 2.0 + 0.5

    @property
    def beta(self) -> float:
        return 1.0 / (self.gamma - 1.0)


def h2k_sq(grid: Grid, s_t, r_t, u_t4: list, r, k: int, gamma: float, u4: list | None = None):
    """Squared H^{2k} norm of a perturbation triple.

    ``u_t4`` is the perturbation velocity as four components (including the
    time component fixed by orthogonality); its pointwise size is the G-norm
    when the background four-velocity ``u4`` is supplied.
    """
    w = Weights(gamma)
    vsq = g_sq_components(u4) if u4 is not None else None
    total = 0.0
    for q in range(2 * k + 1):
        for al in grid.multi_indices(q):
            ds = grid.dmulti(s_t, al)
            dr = grid.dmulti(r_t, al)
            du = [grid.dmulti(c, al) for c in u_t4]
            usq = vsq(du) if vsq is not None else sum(c * c for c in du)
            for a in range(k + 1):
                if q - a > k:
                    continue
                total = total + grid.integrate_weighted(ds * ds, r, 2 * (w.half_u + a))
                total = total + grid.integrate_weighted(dr * dr, r, 2 * (w.half_r + a))
                total = total + grid.integrate_weighted(usq, r, 2 * (w.half_u + a))
    return total


def h2k_norm(grid: Grid, s_t, r_t, u_t4: list, r, k: int, gamma: float, u4: list | None = None) -> float:
    return float(np.sqrt(h2k_sq(grid, s_t, r_t, u_t4, r, k, gamma, u4)))


def tilde_h_sq(grid: Grid, r_t, u_t4: list, r, Gamma, gamma: float, u4: list):
    """Wave norm: int r^{(2-g)/(g-1)} (r~^2/(g-1) + (Gamma+r) r |u~|_G^2)."""
    w = Weights(gamma)
    usq = g_sq_components(u4)(u_t4)
    a = grid.integrate_weighted(r_t * r_t, r, w.base) / (gamma - 1.0)
    b = grid.integrate_weighted((Gamma + r) * usq, r, w.base + 1.0)
    return a + b


def base_energy(grid: Grid, s_t, r_t, u_t4: list, r, Gamma, gamma: float, u4: list):
    """E^0 = 1/2 int r^{(2-g)/(g-1)} (r~^2/(g-1) + (Gamma+r) r |u~|_G^2 + r s~^2)."""
    w = Weights(gamma)
    return 0.5 * tilde_h_sq(grid, r_t, u_t4, r, Gamma, gamma, u4) + 0.5 * grid.integrate_weighted(
        s_t * s_t, r, w.base + 1.0)


@dataclass
class EnergyReport:
    t: float
    E0: float
    E2k_wave: float | None = None
    E2k_transport: float | None = None
    H2k: float | None = None
    entropy_norm: float | None = None
    omega_hat_sq: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def E2k(self) -> float | None:
        if self.E2k_wave is None or self.E2k_transport is None:
            return None
        return self.E2k_wave + self.E2k_transport

    def rows(self) -> list[tuple[float, str, float]]:
        out = [(self.t, "E0", self.E0)]
        for name in ("E2k_wave", "E2k_transport", "H2k", "entropy_norm", "omega_hat_sq"):
            v = getattr(self, name)
            if v is not None:
                out.append((self.t, name, float(v)))
        for name, v in self.extra.items():
            out.append((self.t, name, float(v)))
        return out


def energies(grid: Grid, gamma: float, r, Gamma, u4: list, s_t, r_t, u_t4: list, k: int,
             convective: dict | None = None, omega_hat: list | None = None, t: float = 0.0) -> EnergyReport:
    """All energies of one perturbation at one time.

    ``convective`` maps j -> (D_t^{2j} r~, D_t^{2j} u~ as four components) for
    j = 1..k; ``omega_hat`` is the reduced linearized vorticity as a 4x4
    nested list.  Both are produced by :mod:`vel.dynamics`.
    """
    w = Weights(gamma)
    E0 = base_energy(grid, s_t, r_t, u_t4, r, Gamma, gamma, u4)
    rep = EnergyReport(t=t, E0=float(E0))
    if k == 0:
        rep.H2k = h2k_norm(grid, s_t, r_t, u_t4, r, 0, gamma, u4)
        return rep
    if convective is None or any(j not in convective for j in range(1, k + 1)):
        raise MissingConvectivePowers(f"D_t^(2j) fields for j=1..{k} are required")
    wave = tilde_h_sq(grid, r_t, u_t4, r, Gamma, gamma, u4)
    for j in range(1, k + 1):
        rj, uj = convective[j]
        wave = wave + tilde_h_sq(grid, rj, uj, r, Gamma, gamma, u4)
    sigma = k + w.beta / 2.0
    ent = weighted_sobolev_sq(grid, s_t, 2 * k, sigma, r)
    om = 0.0
    if omega_hat is not None:
        om = weighted_sobolev_sq_twoform(grid, omega_hat, 2 * k - 1, sigma, r, u4)
    rep.E2k_wave = float(wave)
    rep.E2k_transport = float(om + ent)
    rep.entropy_norm = float(np.sqrt(ent))
    rep.omega_hat_sq = float(om)
    rep.H2k = h2k_norm(grid, s_t, r_t, u_t4, r, k, gamma, u4)
    return rep


def weighted_sobolev_sq_twoform(grid: Grid, w: list, j: int, sigma: float, r, u4: list):
    """H^{j,sigma} norm squared of a 2-form, pointwise size via G^{-1} G^{-1}."""
    sq = ginv_sq_twoform(u4)
    total = 0.0
    for q in range(j + 1):
        for al in grid.multi_indices(q):
            dw = [[grid.dmulti(w[a][b], al) if a != b else 0.0 for b in range(4)] for a in range(4)]
            total = total + grid.integrate_weighted(sq(dw), r, 2 * sigma)
    return total
