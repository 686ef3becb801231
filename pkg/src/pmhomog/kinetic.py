"""Kinetic diagnostics for computed solutions.

With ``F = f(x, u)``, the indicator ``chi_+ = 1{p < F}`` solves, in the weak
sense,

    d/dt (g_p(x, p) chi_+) - Lap chi_+ = d/dp m,   m = |grad F|^2 delta_F(p),

and the p-marginal ``n`` of ``m`` is dominated by ``eta_0(p)``, the L1 norm of
``(v(x, phi) - v(x, p))_+`` (``p > 0``) or of its negative part (``p < 0``).
All routines operate on snapshots of a :class:`~pmhomog.solver.Trajectory`;
time integrals use the trapezoid rule over snapshots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .flux import dg_dp, f_eval, g_eval
from .solver import Field, Grid1D

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)


def chi_plus(u: Field, coeffs, p: float) -> np.ndarray:
    """``1{p < f(x_i, u_i)}`` per cell."""
    return (p < coeffs.flux(np.asarray(u.u))).astype(float)


def chi_minus(u: Field, coeffs, p: float) -> np.ndarray:
    """``1{p > f(x_i, u_i)}`` per cell."""
    return (p > coeffs.flux(np.asarray(u.u))).astype(float)


# ---------------------------------------------------------------------------
# smooth test functions


@dataclass(frozen=True)
class Bump:
    """``(1 - r^2)^k`` with ``r = (s - center) / width``, zero for ``|r| >= 1``."""

    center: float
    width: float
    power: int = 4

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigError("bump width must be positive")
        if self.power < 3:
            raise ConfigError("bump power must be >= 3 for a C2 test function")

    def _r(self, s):
        return (np.asarray(s, dtype=float) - self.center) / self.width

    def __call__(self, s):
        r = self._r(s)
        q = np.clip(1.0 - r * r, 0.0, None)
        return q**self.power

    def d1(self, s):
        r = self._r(s)
        q = np.clip(1.0 - r * r, 0.0, None)
        k = self.power
        return -2.0 * k * r * q ** (k - 1) / self.width

    def d2(self, s):
        r = self._r(s)
        q = np.clip(1.0 - r * r, 0.0, None)
        k = self.power
        return (-2.0 * k * q ** (k - 1) + 4.0 * k * (k - 1) * r * r * q ** (k - 2)) / self.width**2

    def antiderivative_total(self) -> float:
        # int (1-r^2)^k dr over [-1, 1] = sqrt(pi) Gamma(k+1) / Gamma(k+3/2)
        k = self.power
        return self.width * math.sqrt(math.pi) * math.gamma(k + 1) / math.gamma(k + 1.5)

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.width, self.center + self.width)


@dataclass(frozen=True)
class SpaceTimeTest:
    """Separable test function ``phi(t, x) = a(t) b(x)``.

    ``time=None`` means ``a == 1``; then ``phi(0, .)`` does not vanish and the
    initial terms of the weak forms are active.
    """

    space: Bump
    time: Bump | None = None

    def _a(self, t):
        return np.ones_like(np.asarray(t, dtype=float)) if self.time is None else self.time(t)

    def phi(self, t, x):
        return self._a(t) * self.space(x)

    def phi_t(self, t, x):
        if self.time is None:
            return np.zeros(np.broadcast(np.asarray(t), np.asarray(x)).shape)
        return self.time.d1(t) * self.space(x)

    def phi_x(self, t, x):
        return self._a(t) * self.space.d1(x)

    def phi_xx(self, t, x):
        return self._a(t) * self.space.d2(x)


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    if times.size >= 2:
        dt = np.diff(times)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
    return w


def _face_values(traj, coeffs):
    """Per-snapshot cell fluxes ``F`` (shape ``(K, n)``)."""
    return np.asarray(coeffs.flux(traj.values), dtype=float)


# ---------------------------------------------------------------------------
# defect measure


@dataclass(frozen=True, eq=False)
class KineticDefect:
    p_edges: np.ndarray
    n_values: np.ndarray  # density per unit p
    eta0_values: np.ndarray  # bin average of eta_0
    allowance: float = 0.0  # deposit-rule discretisation estimate
    total_mass: float = 0.0  # time-space integral of |grad_h F|^2
    outside_mass: float = 0.0  # deposits falling outside p_edges
    metadata: dict = field(default_factory=dict)

    @property
    def p_mid(self) -> np.ndarray:
        return 0.5 * (self.p_edges[1:] + self.p_edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.p_edges)

    def inflated(self, factor: float) -> "KineticDefect":
        """Copy with ``n`` scaled by ``factor`` (checker sanity tests)."""
        return replace(self, n_values=self.n_values * factor)


def eta_bound(coeffs, phi, grid: Grid1D, p) -> np.ndarray | float:
    """``eta_0(p)``; vectorised over ``p``, ``eta_0(0) = 0`` by convention."""
    p_arr = np.asarray(p, dtype=float)
    v_phi = np.asarray(coeffs.inverse(np.asarray(phi(grid.centers), dtype=float)), dtype=float)
    out = np.zeros(p_arr.size)
    for j, pj in enumerate(p_arr.ravel()):
        if pj == 0.0:
            continue
        d = v_phi - np.asarray(coeffs.inverse(np.full(grid.n, pj)), dtype=float)
        out[j] = grid.h * (np.maximum(d, 0.0).sum() if pj > 0 else np.maximum(-d, 0.0).sum())
    return float(out[0]) if p_arr.ndim == 0 else out.reshape(p_arr.shape)


def _deposits(traj, coeffs):
    F = _face_values(traj, coeffs)
    w = _trapezoid_weights(np.asarray(traj.times, dtype=float))
    dF = np.diff(F, axis=1)
    mass = w[:, None] * dF**2 / traj.grid.h
    return F, dF, mass


def defect_histogram(traj, coeffs, p_edges, phi=None) -> KineticDefect:
    """Histogram density of ``n`` from face deposits at ``(F_i + F_{i+1}) / 2``.

    Each interior face and time weight deposits ``w_k h (dF / h)^2``. ``phi``
    (the initial profile) fills ``eta0_values``; without it they are zero.
    """
    if len(traj) < 2:
        raise ConfigError("defect histogram needs a trajectory with >= 2 snapshots")
    edges = np.asarray(p_edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ConfigError("p_edges must be strictly increasing")
    F, dF, mass = _deposits(traj, coeffs)
    mid = 0.5 * (F[:, 1:] + F[:, :-1])
    widths = np.diff(edges)
    counts, _ = np.histogram(mid.ravel(), bins=edges, weights=mass.ravel())
    n_mid = counts / widths
    total = float(mass.sum())

    # the same mass spread uniformly over [F_i, F_{i+1}] (exact for linear F)
    lo = np.minimum(F[:, 1:], F[:, :-1]).ravel()
    hi = np.maximum(F[:, 1:], F[:, :-1]).ravel()
    m = mass.ravel()
    keep = m > 0
    lo, hi, m = lo[keep], hi[keep], m[keep]
    spread = np.zeros(widths.size)
    span = hi - lo
    flat = span <= 1e-14 * (1.0 + np.abs(hi))
    if flat.any():
        c, _ = np.histogram(lo[flat], bins=edges, weights=m[flat])
        spread += c
    if (~flat).any():
        a, b, mm = lo[~flat], hi[~flat], m[~flat] / span[~flat]
        overlap = np.clip(np.minimum(b[:, None], edges[None, 1:]) - np.maximum(a[:, None], edges[None, :-1]), 0.0, None)
        spread += mm @ overlap
    n_spread = spread / widths
    allowance = float(np.max(np.abs(n_mid - n_spread))) if widths.size else 0.0

    if phi is not None:
        # bin average of eta_0 by 4-point Gauss-Legendre (never hits the edge p = 0)
        nodes = 0.5 * (edges[:-1, None] + edges[1:, None]) + 0.5 * widths[:, None] * _GL_X[None, :]
        eta = eta_bound(coeffs, phi, traj.grid, nodes.ravel()).reshape(nodes.shape)
        eta0 = 0.5 * eta @ _GL_W
    else:
        eta0 = np.zeros(widths.size)
    meta = dict(traj.provenance)
    meta.update(horizon=float(traj.times[-1]), n_cells=traj.grid.n, L=traj.grid.L)
    return KineticDefect(edges, n_mid, eta0, allowance, total, total - float(counts.sum()), meta)


@dataclass(frozen=True)
class DefectReport:
    passed: bool
    max_violation: float  # max(n - eta0), may be negative
    tol_bin: float
    allowance: float
    slack: np.ndarray  # eta0 - n per bin
    worst_bin: int


def check_defect_bound(kd: KineticDefect, rel_tol: float = 0.05) -> DefectReport:
    """Bin-wise ``n <= eta0 + tol_bin``, ``tol_bin = rel_tol * max eta0 + allowance``."""
    slack = kd.eta0_values - kd.n_values
    tol_bin = rel_tol * float(np.max(kd.eta0_values, initial=0.0)) + kd.allowance
    viol = -slack
    worst = int(np.argmax(viol)) if viol.size else 0
    max_v = float(viol[worst]) if viol.size else 0.0
    return DefectReport(bool(np.all(viol <= tol_bin)), max_v, tol_bin, kd.allowance, slack, worst)


# ---------------------------------------------------------------------------
# weak-form residuals


def _check_band(coeffs, lo: float, hi: float, dp: float, band_bins: float = 2.0):
    b = np.asarray(coeffs.triple.b if hasattr(coeffs, "triple") else 0.0, dtype=float)
    delta = band_bins * dp
    if np.any((b + delta > lo) & (b - delta < hi)):
        raise ConfigError(
            f"p-support [{lo:.4g}, {hi:.4g}] of the test function meets the singular band around b (half-width {delta:.3g})"
        )


def _interp_rows(table: np.ndarray, p0: float, dp: float, F: np.ndarray) -> np.ndarray:
    """Linear interpolation of ``table[i, :]`` (uniform nodes) at ``F[..., i]``."""
    P = table.shape[-1]
    s = (F - p0) / dp
    j = np.clip(np.floor(s).astype(int), 0, P - 2)
    frac = np.clip(s - j, 0.0, 1.0)
    below, above = s <= 0, s >= P - 1
    rows = np.broadcast_to(np.arange(table.shape[0]), F.shape) if table.ndim == 2 else None
    if rows is None:
        lo, hi = table[j], table[j + 1]
        return np.where(below, table[0], np.where(above, table[-1], lo + frac * (hi - lo)))
    lo, hi = table[rows, j], table[rows, j + 1]
    return np.where(below, table[rows, 0], np.where(above, table[rows, -1], lo + frac * (hi - lo)))


def _cumtrapz(y: np.ndarray, dx: float) -> np.ndarray:
    out = np.zeros_like(y)
    out[..., 1:] = np.cumsum(0.5 * dx * (y[..., 1:] + y[..., :-1]), axis=-1)
    return out


def kinetic_residual(traj, coeffs, phi_test: SpaceTimeTest, xi_test: Bump, p_quad) -> float:
    """``|R|`` for the weak form of the kinetic equation with test ``phi(t, x) xi(p)``.

    R = int (g_p chi phi_t + chi Lap phi) xi + int g_p chi_0 phi(0) xi - <m, phi xi'>

    The ``p`` integrals are cumulative trapezoid tables on ``p_quad`` evaluated
    at ``F`` by linear interpolation; the ``m`` term uses the face deposits.
    """
    p = np.asarray(p_quad, dtype=float)
    if p.ndim != 1 or p.size < 3:
        raise ConfigError("p_quad needs at least 3 nodes")
    dp = float(p[1] - p[0])
    if not np.allclose(np.diff(p), dp, rtol=1e-9, atol=0):
        raise ConfigError("p_quad must be uniform")
    lo, hi = xi_test.support
    if lo < p[0] - 1e-12 or hi > p[-1] + 1e-12:
        raise ConfigError("p_quad must cover the support of xi")
    _check_band(coeffs, lo, hi, dp)

    grid = traj.grid
    x = grid.centers
    triple = coeffs.triple
    xi = xi_test(p)
    gp = dg_dp(type(triple)(triple.a[:, None], triple.b[:, None], triple.gamma[:, None]), p[None, :])
    C1 = _cumtrapz(gp * xi[None, :], dp)  # int_{p0}^{p} g_p xi, per cell
    C2 = _cumtrapz(xi, dp)  # int_{p0}^{p} xi

    t = np.asarray(traj.times, dtype=float)
    w = _trapezoid_weights(t)
    F = _face_values(traj, coeffs)
    A = _interp_rows(C1, p[0], dp, F)
    X = _interp_rows(C2, p[0], dp, F)
    tt = t[:, None]
    bulk = np.sum(w[:, None] * (A * phi_test.phi_t(tt, x[None, :]) + X * phi_test.phi_xx(tt, x[None, :]))) * grid.h
    init = np.sum(A[0] * phi_test.phi(0.0, x)) * grid.h

    xf = grid.faces
    dF = np.diff(F, axis=1)
    Fm = 0.5 * (F[:, 1:] + F[:, :-1])
    m_term = np.sum(w[:, None] * dF**2 / grid.h * phi_test.phi(tt, xf[None, :]) * xi_test.d1(Fm))
    return float(abs(bulk + init - m_term))


def _H(s, sigma):
    return np.clip(s / sigma, 0.0, 1.0)


def _G(s, sigma):
    """Antiderivative of ``H_sigma`` with ``G(0) = 0``."""
    s = np.asarray(s, dtype=float)
    return np.where(s <= 0, 0.0, np.where(s <= sigma, 0.5 * s * s / sigma, s - 0.5 * sigma))


def _trapezoid_adaptive(func, lo, hi, tol, max_level=20):
    """Composite trapezoid on many intervals at once with global doubling."""
    width = hi - lo
    fa, fb = func(lo, 0), func(hi, 0)
    T = 0.5 * width * (fa + fb)
    n = 1
    for _ in range(max_level):
        k = (np.arange(n) + 0.5) / n
        mids = lo[:, None] + width[:, None] * k[None, :]
        fm = func(mids, 1)
        T_new = 0.5 * T + 0.5 * width * fm.mean(axis=1)
        err = np.abs(T_new - T) / 3.0
        T, n = T_new, 2 * n
        if np.all(err <= tol):
            break
    return T


def b_sigma(coeffs, cells, lam, p: float, sigma: float, tol: float = 1e-8) -> np.ndarray:
    """``B_sigma(x_i, lam) = int_{v(x_i, p)}^{lam} H_sigma(f(x_i, r) - p) dr``.

    Trapezoid with global doubling, split at the kink ``r = g(x_i, p + sigma)``.
    """
    tr = coeffs.triple
    a, b, gm = tr.a[cells], tr.b[cells], tr.gamma[cells]
    T = type(tr)(a, b, gm)
    lam = np.asarray(lam, dtype=float)
    v = g_eval(T, np.full(lam.shape, p))
    r_sig = g_eval(T, np.full(lam.shape, p + sigma))
    out = np.zeros(lam.shape)
    act = lam > v
    if not act.any():
        return out
    a, b, gm, lam_a, v_a, rs_a = a[act], b[act], gm[act], lam[act], v[act], r_sig[act]
    knee = np.minimum(lam_a, rs_a)

    def integrand(r, _):
        sub = (slice(None), None) if r.ndim == 2 else (slice(None),)
        Tt = type(tr)(a[sub], b[sub], gm[sub])
        return _H(f_eval(Tt, r) - p, sigma)

    ramp = _trapezoid_adaptive(integrand, v_a, knee, tol)
    out[act] = ramp + np.maximum(lam_a - rs_a, 0.0)
    return out


def entropy_identity_gap(traj, coeffs, p: float, sigma: float, phi_test: SpaceTimeTest, tol: float = 1e-8) -> float:
    """``|LHS - RHS|`` of the entropy identity against the stationary state ``v(., p)``.

    ``H_sigma`` and ``H_sigma'`` are integrated exactly along the piecewise
    linear interpolant of ``F`` between cell centres.
    """
    if not sigma > 0:
        raise ConfigError("sigma must be positive")
    grid = traj.grid
    x, xf = grid.centers, grid.faces
    t = np.asarray(traj.times, dtype=float)
    w = _trapezoid_weights(t)
    tt = t[:, None]
    K, n = traj.values.shape
    cells = np.broadcast_to(np.arange(n), (K, n)).ravel()
    B = b_sigma(coeffs, cells, traj.values.ravel(), p, sigma, tol).reshape(K, n)
    lhs = -np.sum(w[:, None] * B * phi_test.phi_t(tt, x[None, :])) * grid.h
    lhs -= np.sum(B[0] * phi_test.phi(0.0, x)) * grid.h

    S = _face_values(traj, coeffs) - p
    dS = np.diff(S, axis=1)
    Hl, Hr = _H(S[:, :-1], sigma), _H(S[:, 1:], sigma)
    flat = np.abs(dS) <= 1e-13
    safe = np.where(flat, 1.0, dS)
    Hbar = np.where(flat, 0.5 * (Hl + Hr), (_G(S[:, 1:], sigma) - _G(S[:, :-1], sigma)) / safe)
    lhs += np.sum(w[:, None] * Hbar * dS * phi_test.phi_x(tt, xf[None, :]))
    rhs = -np.sum(w[:, None] * dS * (Hr - Hl) / grid.h * phi_test.phi(tt, xf[None, :]))
    return float(abs(lhs - rhs))


def layer_cake_reconstruct(u: Field, coeffs, p_min: float, p_max: float, n_nodes: int = 2048, band_bins: float = 2.0):
    """Rebuild ``u`` as ``g(x, p_min) + int chi_+(p) g_p(x, p) dp``.

    ``n_nodes`` uniform nodes on ``[p_min, p_max]``; 4-point Gauss-Legendre on
    each piece, the piece containing ``F`` cut at ``F``. Inside the band
    ``|p - b_i| < band_bins * dp`` the clamped ``g_p`` is not sampled; that
    part is added through ``g`` itself.
    """
    if not p_max > p_min or n_nodes < 2:
        raise ConfigError("need p_min < p_max and n_nodes >= 2")
    nodes = np.linspace(p_min, p_max, n_nodes)
    dp = nodes[1] - nodes[0]
    delta = band_bins * dp
    tr = coeffs.triple
    F = np.asarray(coeffs.flux(np.asarray(u.u)), dtype=float)
    out = np.empty(F.size)
    Triple = type(tr)
    for i in range(F.size):
        ti = Triple(tr.a[i], tr.b[i], tr.gamma[i])
        bi = float(tr.b[i])
        band_lo, band_hi = bi - delta, bi + delta
        cut = min(max(F[i], p_min), p_max)
        br = nodes[nodes < cut]
        br = np.unique(np.concatenate([br, [cut], [c for c in (band_lo, band_hi) if p_min < c < cut]]))
        lo, hi = br[:-1], br[1:]
        outside = (lo >= band_hi) | (hi <= band_lo)
        lo, hi = lo[outside], hi[outside]
        q = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * _GL_X[None, :]
        chi = (q < F[i]).astype(float)  # chi_+ at the quadrature nodes
        integral = float(np.sum(0.5 * (hi - lo) * ((chi * dg_dp(ti, q)) @ _GL_W)))
        # exact band contribution, int over the band below F of g_p
        top = min(band_hi, cut)
        bottom = max(band_lo, p_min)
        if top > bottom:
            integral += float(g_eval(ti, top) - g_eval(ti, bottom))
        out[i] = float(g_eval(ti, p_min)) + integral
    return out

