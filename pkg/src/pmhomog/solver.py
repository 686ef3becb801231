"""Backward-Euler finite volumes for ``u_t = (f(x, u))_xx`` on ``[0, L]``.

Cell-centred grid, three-point Laplacian of the flux, damped Newton on the
tridiagonal system. Two flux models share the stepper:

* :class:`CoefficientField` -- heterogeneous flux ``f(x_i, u)`` with per-cell
  coefficients ``(a, b, gamma)`` sampled from a medium at ``x_i / eps``;
* :class:`HomogenizedFlux` -- the spatially uniform effective flux.

Boundary conditions: ``dirichlet_stationary`` fixes the ghost flux value to
``p_bc`` (ghost state ``v(x, p_bc)``, i.e. the stationary profile), periodic
wraps indices.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigError, SolverError
from .flux import CoefficientTriple, df_du, f_eval, g_eval
from .medium import MediumRealization, evaluate

logger = logging.getLogger(__name__)

BCS = ("dirichlet_stationary", "periodic")


@dataclass(frozen=True)
class Grid1D:
    L: float
    n: int

    def __post_init__(self):
        if self.n < 4:
            raise ConfigError("grid needs at least 4 cells")
        if not self.L > 0:
            raise ConfigError("domain length must be positive")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    @property
    def faces(self) -> np.ndarray:
        """Interior face positions ``x_{i+1/2}``, ``i = 0 .. n-2``."""
        return np.arange(1, self.n) * self.h


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    newton_tol: float | None = None  # default 1e-10 * n on sum_i |R_i|
    newton_max: int = 50
    bc: str = "dirichlet_stationary"
    p_bc: float = 0.0
    max_halvings: int = 6
    max_damping: int = 30

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.t_end < 0:
            raise ConfigError("t_end must be non-negative")
        if self.newton_tol is not None and not self.newton_tol > 0:
            raise ConfigError("newton_tol must be positive")
        if self.bc not in BCS:
            raise ConfigError(f"unknown boundary condition {self.bc!r}; expected one of {BCS}")

    def tol(self, n: int) -> float:
        return self.newton_tol if self.newton_tol is not None else 1e-10 * n


@dataclass(frozen=True, eq=False)
class Field:
    u: np.ndarray
    t: float = 0.0


@dataclass(frozen=True, eq=False)
class CoefficientField:
    grid: Grid1D
    triple: CoefficientTriple
    eps: float = math.nan
    realization: str = ""

    def flux(self, u):
        return f_eval(self.triple, u)

    def flux_and_slope(self, u):
        return f_eval(self.triple, u), df_du(self.triple, u)

    def stationary(self, p) -> np.ndarray:
        """Stationary profile ``v(x_i, p) = g(x_i, p)``."""
        return g_eval(self.triple, p)

    def inverse(self, p) -> np.ndarray:
        return g_eval(self.triple, p)


@dataclass(frozen=True, eq=False)
class HomogenizedFlux:
    """Spatially uniform flux ``u -> fbar(u)``."""

    grid: Grid1D
    eff: object  # EffectiveFlux

    def flux(self, u):
        return np.asarray(self.eff.fbar(u))

    def flux_and_slope(self, u):
        return self.eff.fbar_and_slope(u)

    def stationary(self, p) -> np.ndarray:
        return np.full(self.grid.n, float(self.eff.gbar(p)))

    def inverse(self, p) -> np.ndarray:
        return np.broadcast_to(self.eff.gbar(p), (self.grid.n,)).astype(float)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    values: np.ndarray  # (n_snapshots, n)
    grid: Grid1D
    config: SolverConfig
    provenance: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def field(self, k: int) -> Field:
        return Field(self.values[k], float(self.times[k]))

    def mass(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.grid.h


def assemble_coefficients(
    r: MediumRealization, eps: float, grid: Grid1D, min_cells_per_eps: float = 8.0, warn_cells_per_eps: float = 16.0
) -> CoefficientField:
    """Freeze ``f(T(x_i / eps) omega, .)`` on the grid cells."""
    if not eps > 0:
        raise ConfigError("eps must be positive")
    cpe = eps / grid.h
    if cpe < min_cells_per_eps * (1 - 1e-12):
        raise ConfigError(f"under-resolved medium: {cpe:.3g} cells per eps (< {min_cells_per_eps:g})")
    if cpe < warn_cells_per_eps * (1 - 1e-12):
        warnings.warn(f"only {cpe:.3g} cells per eps (recommended >= {warn_cells_per_eps:g})", stacklevel=2)
    c = evaluate(r, grid.centers / eps)
    triple = CoefficientTriple(
        np.broadcast_to(c.a, (grid.n,)).astype(float),
        np.broadcast_to(c.b, (grid.n,)).astype(float),
        np.broadcast_to(c.gamma, (grid.n,)).astype(float),
    ).validate()
    return CoefficientField(grid, triple, float(eps), r.label)


def check_support(phi, grid: Grid1D, margin: float = 0.1) -> None:
    x = grid.centers
    edge = (x < margin * grid.L) | (x > (1 - margin) * grid.L)
    vals = np.asarray(phi(x[edge]), dtype=float)
    if np.any(vals != 0.0):
        raise ConfigError(f"initial profile must vanish within {margin:.0%} of the domain boundary")


def well_prepared_initial(coeffs, phi, grid: Grid1D, require_compact_support: bool = True) -> Field:
    """``u_0(x) = g(x, phi(x))``: data already on the local stationary profiles."""
    if require_compact_support:
        check_support(phi, grid)
    p = np.broadcast_to(np.asarray(phi(grid.centers), dtype=float), (grid.n,))
    if not np.all(np.isfinite(p)):
        raise ConfigError("initial profile must be finite")
    return Field(np.asarray(coeffs.inverse(p), dtype=float), 0.0)


def _laplacian_F(F: np.ndarray, bc: str, p_bc: float) -> np.ndarray:
    if bc == "periodic":
        return np.roll(F, -1) - 2.0 * F + np.roll(F, 1)
    out = -2.0 * F
    out[:-1] += F[1:]
    out[1:] += F[:-1]
    out[0] += p_bc
    out[-1] += p_bc
    return out


def _solve_tridiagonal(lower, diag, upper, rhs, periodic: bool):
    """``lower[i] = J[i, i-1]``, ``upper[i] = J[i, i+1]`` (cyclic corners when periodic)."""
    n = diag.size
    if not periodic:
        ab = np.zeros((3, n))
        ab[0, 1:] = upper[:-1]
        ab[1] = diag
        ab[2, :-1] = lower[1:]
        return solve_banded((1, 1), ab, rhs, check_finite=False)
    # Sherman-Morrison for the two corner entries
    corner_top, corner_bot = lower[0], upper[-1]
    gam = -diag[0]
    d = diag.copy()
    d[0] -= gam
    d[-1] -= corner_top * corner_bot / gam
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = d
    ab[2, :-1] = lower[1:]
    uvec = np.zeros(n)
    uvec[0], uvec[-1] = gam, corner_bot
    sol = solve_banded((1, 1), ab, np.stack([rhs, uvec], axis=1), check_finite=False)
    y, q = sol[:, 0], sol[:, 1]
    vy = y[0] + corner_top / gam * y[-1]
    vq = q[0] + corner_top / gam * q[-1]
    return y - q * (vy / (1.0 + vq))


def step_implicit(u: Field, model, dt: float, cfg: SolverConfig) -> Field:
    """One backward-Euler step solved by damped Newton."""
    grid = model.grid
    c = dt / grid.h**2
    u_old = np.asarray(u.u, dtype=float)
    if not np.all(np.isfinite(u_old)):
        raise SolverError("non-finite state passed to step_implicit", t=u.t)
    tol = cfg.tol(grid.n)
    periodic = cfg.bc == "periodic"

    def residual(w):
        F, dF = model.flux_and_slope(w)
        return w - u_old - c * _laplacian_F(F, cfg.bc, cfg.p_bc), dF

    w = u_old.copy()
    R, dF = residual(w)
    norm = float(np.abs(R).sum())
    for it in range(cfg.newton_max + 1):
        if norm <= tol:
            return Field(w, u.t + dt)
        if it == cfg.newton_max:
            break
        s = c * np.maximum(dF, 0.0)
        diag = 1.0 + 2.0 * s
        lower = -np.roll(s, 1)
        upper = -np.roll(s, -1)
        delta = _solve_tridiagonal(lower, diag, upper, -R, periodic)
        lam = 1.0
        for _ in range(cfg.max_damping + 1):
            trial = w + lam * delta
            R_new, dF_new = residual(trial)
            norm_new = float(np.abs(R_new).sum())
            if np.isfinite(norm_new) and norm_new < norm:
                break
            lam *= 0.5
        else:
            raise SolverError(f"damping failed at t={u.t:.6g} (residual {norm:.3e})", residual=norm, t=u.t)
        w, R, dF, norm = trial, R_new, dF_new, norm_new
    raise SolverError(
        f"Newton did not converge in {cfg.newton_max} iterations at t={u.t:.6g} (residual {norm:.3e})",
        residual=norm,
        t=u.t,
    )


def _advance(u: Field, model, dt: float, cfg: SolverConfig, stats: dict) -> Field:
    last = None
    for k in range(cfg.max_halvings + 1):
        sub = dt / 2**k
        try:
            v = u
            for _ in range(2**k):
                v = step_implicit(v, model, sub, cfg)
            stats["steps"] += 2**k
            stats["retries"] += k
            return Field(v.u, u.t + dt)
        except SolverError as exc:
            last = exc
            logger.debug("step at t=%.6g failed with dt=%.3g, halving", u.t, sub)
    raise last


def solve(u0: Field, model, cfg: SolverConfig, snapshot_times=None) -> Trajectory:
    """March to ``cfg.t_end``; store ``u0`` plus each requested snapshot.

    ``snapshot_times=None`` records every step. ``t_end`` is always recorded.
    """
    t_end = float(cfg.t_end)
    if snapshot_times is None:
        n_steps = max(int(math.ceil(t_end / cfg.dt - 1e-9)), 0)
        targets = [min((k + 1) * cfg.dt, t_end) for k in range(n_steps)]
    else:
        snaps = np.asarray(snapshot_times, dtype=float)
        if np.any(np.diff(snaps) <= 0):
            raise ConfigError("snapshot_times must be increasing")
        if snaps.size and (snaps[-1] > t_end * (1 + 1e-12) or snaps[0] < 0):
            raise ConfigError("snapshot_times must lie in [0, t_end]")
        targets = [float(s) for s in snaps if s > 0]
        if t_end > 0 and (not targets or targets[-1] < t_end):
            targets.append(t_end)

    stats = {"steps": 0, "retries": 0}
    times = [0.0]
    values = [np.asarray(u0.u, dtype=float).copy()]
    u = Field(values[0], 0.0)
    for target in targets:
        while u.t < target:
            dt = cfg.dt
            if target - (u.t + dt) <= 1e-10 * cfg.dt:
                dt = target - u.t
            u = _advance(u, model, dt, cfg, stats)
            if abs(u.t - target) <= 1e-10 * cfg.dt:
                u = Field(u.u, target)
        times.append(target)
        values.append(u.u.copy())
    prov = {}
    if isinstance(model, CoefficientField):
        prov = {"realization": model.realization, "eps": model.eps}
    return Trajectory(np.array(times), np.array(values), model.grid, cfg, prov, stats)


def solve_homogenized(eff, phi, grid: Grid1D, cfg: SolverConfig, snapshot_times=None, require_compact_support: bool = True) -> Trajectory:
    """Solve ``u_t = fbar(u)_xx`` from ``u(0, x) = gbar(phi(x))``."""
    model = HomogenizedFlux(grid, eff)
    u0 = well_prepared_initial(model, phi, grid, require_compact_support)
    traj = solve(u0, model, cfg, snapshot_times)
    traj.provenance.update({"model": "homogenized", "method": getattr(eff, "method", "")})
    return traj


def l1_norm(u, grid: Grid1D) -> float:
    return float(np.abs(u).sum() * grid.h)
