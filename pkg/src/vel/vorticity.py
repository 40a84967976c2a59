"""Enthalpy current, relativistic vorticity and its linearization.

All two-forms are 4x4 nested lists of fields (series or arrays) with lower
indices; antisymmetry holds by construction because only the upper triangle
is computed and mirrored.  Time derivatives come from the time-Taylor series
of the inputs, so the caller decides where they come from: the closed-form
elimination (identities then hold up to space discretisation for any data),
an analytic expression, or differences of an evolved time history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import series as S
from .dynamics import BgSeries, background_series_from_state, step_rk4_nonlinear, BackgroundState, stable_dt
from .errors import MissingTimeDerivative, SeriesTooShort
from .grid_norms import Grid, fornberg_weights, weighted_sobolev_sq_twoform
from .thermo import GasParams, dgamma_ds, gamma_of_entropy

ETA = (-1.0, 1.0, 1.0, 1.0)


def _require(x, order: int = 1):
    if not isinstance(x, S.Series) or x.order < order:
        raise MissingTimeDerivative(f"a time series of order >= {order} is required")


def _dmu(grid: Grid, f, mu: int, n: int):
    return f.derivative().truncate(n) if mu == 0 else grid.d(f.truncate(n), mu)


def exterior_derivative(grid: Grid, w: list) -> list:
    """(dw)_{ab} = d_a w_b - d_b w_a for a covector given as four series."""
    for c in w:
        _require(c)
    n = min(c.order for c in w) - 1
    zero = w[0].truncate(n) * 0.0
    out = [[zero] * 4 for _ in range(4)]
    for a in range(4):
        for b in range(a + 1, 4):
            val = _dmu(grid, w[b], a, n) - _dmu(grid, w[a], b, n)
            out[a][b] = val
            out[b][a] = -val
    return out


def enthalpy(s, r, params: GasParams):
    G = gamma_of_entropy(s, params)
    return (G + r) / G


def enthalpy_lin(s, r, s_t, r_t, params: GasParams):
    """Exact directional derivative of (Gamma(s) + r)/Gamma(s) along (s~, r~)."""
    G = gamma_of_entropy(s, params)
    Gp = dgamma_ds(s, params)
    return r_t / G - r * Gp * s_t / (G * G)


def enthalpy_current(bg: BgSeries) -> list:
    """v_a = h u_a (index lowered)."""
    h = enthalpy(bg.s, bg.r, bg.params)
    u4 = bg.u4
    return [ETA[a] * h * u4[a] for a in range(4)]


@dataclass
class VorticityPack:
    v: list
    omega: list
    omega_tilde: list | None = None
    omega_hat: list | None = None
    omega_bar: list | None = None

    def decomposition_residual(self) -> float:
        if self.omega_tilde is None:
            return 0.0
        out = 0.0
        for a in range(4):
            for b in range(4):
                d = self.omega_tilde[a][b] - self.omega_hat[a][b] - self.omega_bar[a][b]
                out = max(out, float(np.max(np.abs(S.value(d)))))
        return out


def vorticity(bg: BgSeries) -> VorticityPack:
    v = enthalpy_current(bg)
    return VorticityPack(v=v, omega=exterior_derivative(bg.grid, v))


def linearized_vorticity(bg: BgSeries, lin_series: tuple) -> VorticityPack:
    """omega~ = d(h u~ + h~ u) split into omega^ = d(h u~) and omega_bar = d(h~ u)."""
    s_t, r_t, u_t = lin_series
    n = min(x.order for x in (s_t, r_t, *u_t))
    b = bg.truncate(n)
    params = bg.params
    h = enthalpy(b.s, b.r, params)
    ht = enthalpy_lin(b.s, b.r, s_t, r_t, params)
    u4 = b.u4
    ut0 = (b.u[0] * u_t[0] + b.u[1] * u_t[1] + b.u[2] * u_t[2]) / u4[0]
    ut4 = [ut0, *u_t]
    w_hat = [ETA[a] * h * ut4[a] for a in range(4)]
    w_bar = [ETA[a] * ht * u4[a] for a in range(4)]
    w_tld = [ETA[a] * (h * ut4[a] + ht * u4[a]) for a in range(4)]
    grid = bg.grid
    v = enthalpy_current(b)
    return VorticityPack(v=v, omega=exterior_derivative(grid, v),
                         omega_tilde=exterior_derivative(grid, w_tld),
                         omega_hat=exterior_derivative(grid, w_hat),
                         omega_bar=exterior_derivative(grid, w_bar))


# ---------------------------------------------------------------- identities
def vorticity_eq1_residual(bg: BgSeries) -> list:
    """u^a omega_{ab} - ((g-1) r / (g Gamma)) d_b s, for b = 0..3."""
    _require(bg.s)
    g = bg.params.gamma
    om = vorticity(bg).omega
    n = om[0][1].order
    b = bg.truncate(n)
    u4 = b.u4
    kap = (g - 1.0) * b.r / (g * gamma_of_entropy(b.s, bg.params))
    return [sum(u4[a] * om[a][be] for a in range(4)) - kap * _dmu(bg.grid, bg.s, be, n)
            for be in range(4)]


def vorticity_eq2_residual(bg: BgSeries) -> list:
    """Lie-derivative form of the vorticity evolution; returns the 4x4 residual."""
    if bg.order < 2:
        raise MissingTimeDerivative("background series of order >= 2 required")
    g = bg.params.gamma
    grid = bg.grid
    om = vorticity(bg).omega  # order N-1
    n = om[0][1].order - 1
    b = bg.truncate(n + 1)
    u4 = [c.truncate(n + 1) for c in b.u4]
    uu = [c.truncate(n) for c in u4]
    du = [[_dmu(grid, u4[m], a, n) for m in range(4)] for a in range(4)]  # du[a][m] = d_a u^m
    dr = [_dmu(grid, b.r, a, n) for a in range(4)]
    ds = [_dmu(grid, b.s, a, n) for a in range(4)]
    G = gamma_of_entropy(b.s.truncate(n), bg.params)
    omn = [[om[a][c].truncate(n) for c in range(4)] for a in range(4)]
    res = [[None] * 4 for _ in range(4)]
    for a in range(4):
        for c in range(4):
            lhs = sum(uu[m] * _dmu(grid, om[a][c], m, n) for m in range(4))
            lhs = lhs + sum(du[a][m] * omn[m][c] for m in range(4))
            lhs = lhs + sum(du[c][m] * omn[a][m] for m in range(4))
            rhs = (g - 1.0) / (g * G) * (dr[a] * ds[c] - dr[c] * ds[a])
            res[a][c] = lhs - rhs
    return res


def linearized_vorticity_evolution_residual(bg: BgSeries, lin_series: tuple) -> list:
    """Residual of the evolution equation of the full linearized vorticity."""
    g = bg.params.gamma
    grid = bg.grid
    pack = linearized_vorticity(bg, lin_series)
    wt, om = pack.omega_tilde, pack.omega
    n = wt[0][1].order - 1
    if n < 0:
        raise MissingTimeDerivative("perturbation series of order >= 2 required")
    s_t, r_t, u_t = lin_series
    b = bg.truncate(n + 1)
    u4 = [c.truncate(n + 1) for c in b.u4]
    ut0 = (b.u[0] * u_t[0] + b.u[1] * u_t[1] + b.u[2] * u_t[2]) / b.u4[0]
    ut4 = [c.truncate(n + 1) for c in (ut0, *u_t)]
    T = lambda x: x.truncate(n)
    du = [[_dmu(grid, u4[m], a, n) for m in range(4)] for a in range(4)]
    dut = [[_dmu(grid, ut4[m], a, n) for m in range(4)] for a in range(4)]
    dr = [_dmu(grid, b.r, a, n) for a in range(4)]
    ds = [_dmu(grid, b.s, a, n) for a in range(4)]
    drt = [_dmu(grid, r_t, a, n) for a in range(4)]
    dst = [_dmu(grid, s_t, a, n) for a in range(4)]
    G = gamma_of_entropy(T(b.s), bg.params)
    res = [[None] * 4 for _ in range(4)]
    for a in range(4):
        for c in range(4):
            lhs = sum(T(u4[m]) * _dmu(grid, wt[a][c], m, n) for m in range(4))
            lhs = lhs + sum(du[a][m] * T(wt[m][c]) + du[c][m] * T(wt[a][m]) for m in range(4))
            rhs = -sum(T(ut4[m]) * _dmu(grid, om[a][c], m, n) for m in range(4))
            rhs = rhs - sum(dut[a][m] * T(om[m][c]) + dut[c][m] * T(om[a][m]) for m in range(4))
            rhs = rhs + (g - 1.0) ** 2 / (g * g * G) * T(s_t) * (dr[a] * ds[c] - dr[c] * ds[a])
            rhs = rhs + (g - 1.0) / (g * G) * (drt[a] * ds[c] + dr[a] * dst[c] - drt[c] * ds[a] - dr[c] * dst[a])
            res[a][c] = lhs - rhs
    return res


def max_abs(fields, interior: int = 0) -> float:
    """Max |value| over a nested list of fields (optionally trimming boundary rows)."""
    out = 0.0
    stack = [fields]
    while stack:
        f = stack.pop()
        if isinstance(f, (list, tuple)):
            stack.extend(f)
            continue
        v = np.asarray(S.value(f))
        if interior and v.ndim:
            v = v[tuple(slice(interior, -interior) for _ in range(v.ndim))]
        out = max(out, float(np.max(np.abs(v))))
    return out


# ---------------------------------------------------------------- time histories
def series_from_history(times, values, t: float, order: int) -> S.Series:
    """Time series at t from samples by finite differences (Fornberg weights)."""
    times = np.asarray(times, dtype=float)
    if len(times) < order + 3:
        raise SeriesTooShort(f"{len(times)} samples cannot give order {order}")
    fact = 1.0
    coeffs = []
    for k in range(order + 1):
        w = fornberg_weights(t, times, k)
        coeffs.append(np.tensordot(w, np.asarray(values), axes=1) / fact)
        fact *= k + 1
    return S.Series(np.stack(coeffs))


def bg_series_from_history(states: list[BackgroundState], params: GasParams, t: float, order: int) -> BgSeries:
    times = [st.t for st in states]
    mk = lambda key: series_from_history(times, [getattr(st, key) for st in states], t, order)
    s, r = mk("s"), mk("r")
    u = series_from_history(times, [st.u for st in states], t, order)
    return BgSeries(states[0].grid, params, s, r, (u[0], u[1], u[2]), None, t)


def evolve_history(state: BackgroundState, params: GasParams, t_mid: float, dt: float, width: int = 2) -> list:
    """Evolve to t_mid - width*dt, then record 2*width+1 snapshots spaced dt."""
    cur = state
    t_start = t_mid - width * dt
    nsteps = int(round((t_start - state.t) / dt))
    if nsteps < 0 or abs(state.t + nsteps * dt - t_start) > 1e-9:
        raise ValueError("t_mid must be reachable with the given dt")
    for _ in range(nsteps):
        cur = step_rk4_nonlinear(cur, params, dt)
    out = [cur]
    for _ in range(2 * width):
        cur = step_rk4_nonlinear(cur, params, dt)
        out.append(cur)
    return out


def smooth_torus_state(grid: Grid, params: GasParams, amp: float = 0.1, r0: float = 0.2) -> BackgroundState:
    """Smooth shear-plus-acoustic data on a doubly periodic grid."""
    x, y = grid.coords
    L1, L2 = grid.axes[0].length, grid.axes[1].length
    a, b = 2 * np.pi * x / L1, 2 * np.pi * y / L2
    s = 0.2 * np.sin(a) * np.cos(b)
    r = r0 * (1 + 0.3 * np.cos(a + 0.5) * np.sin(b))
    u = np.stack([amp * np.sin(b), amp * np.cos(a) * (1 + 0.5 * np.sin(b)), 0.0 * x])
    return BackgroundState(grid, s, r, u, 0.0)


# ---------------------------------------------------------------- monitors
def curl_extraction_constant(u4: np.ndarray) -> np.ndarray:
    """C(u) = 1 / lambda_min(G^{ab})^2, so that |spatial block of w|_delta^2 <= C(u) |w|_G^2.

    At rest C = 1; under a boost G^{ab} has an eigenvalue below one and the
    constant grows like (u^0)^4.
    """
    Gi = np.diag(ETA)[:, :, None] + 2.0 * u4[:, None] * u4[None, :]
    lam = np.linalg.eigvalsh(np.moveaxis(Gi, (0, 1), (-2, -1)))[..., 0]
    return 1.0 / lam**2


def curl_extraction_gap(u4: np.ndarray, w: np.ndarray) -> np.ndarray:
    """C(u) |w|_G^2 - |spatial block of w|_delta^2, non-negative for every 2-form.

    ``u4`` has shape (4, n) and ``w`` (4, 4, n).
    """
    Gi = np.diag(ETA)[:, :, None] + 2.0 * u4[:, None] * u4[None, :]
    full = np.einsum("acn,bdn,abn,cdn->n", Gi, Gi, w, w)
    spatial = np.sum(w[1:, 1:] ** 2, axis=(0, 1))
    return curl_extraction_constant(u4) * full - spatial


@dataclass
class TransportBoundReport:
    times: np.ndarray
    omega_hat_sq: np.ndarray
    bound: np.ndarray
    C_hat: float
    eps_hat: float

    @property
    def margin(self) -> float:
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.where(self.bound > 0, 1.0 - self.omega_hat_sq / self.bound, 1.0)
        return float(np.min(m))

    @property
    def ok(self) -> bool:
        return bool(np.all(self.omega_hat_sq <= self.bound * (1 + 1e-12) + 1e-300))


def transport_energy_monitor(times, omega_hat_sq, omega_tilde_sq, omega_bar_sq, d_omega_tilde_sq, H_sq) -> TransportBoundReport:
    """Check |w^|^2(t) <= 2 |w~(0)|^2 + 2 eps |.|_H^2(t) + 2 int C |.|_H^2 along a run.

    C = max |d/dt |w~|^2| / |.|_H^2 and eps = max |w_bar|^2 / |.|_H^2 are measured
    over the run; the factor 2 comes from |w^|^2 <= 2|w~|^2 + 2|w_bar|^2.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise SeriesTooShort("need at least two samples")
    H = np.asarray(H_sq, dtype=float)
    safe = np.where(H > 0, H, 1.0)
    C = float(np.max(np.where(H > 0, np.abs(d_omega_tilde_sq) / safe, 0.0)))
    eps = float(np.max(np.where(H > 0, np.asarray(omega_bar_sq) / safe, 0.0)))
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (H[1:] + H[:-1]) * np.diff(times))])
    bound = 2 * omega_tilde_sq[0] + 2 * eps * H + 2 * C * integral
    return TransportBoundReport(times, np.asarray(omega_hat_sq, float), bound, C, eps)


def omega_norm_sq(grid: Grid, w: list, j: int, sigma: float, r, u4: list):
    return weighted_sobolev_sq_twoform(grid, w, j, sigma, r, u4)
