"""Epsilon sweeps comparing heterogeneous solutions with the homogenized limit.

For each ``eps`` and seed the heterogeneous problem is solved from the
well-prepared datum ``g(x/eps, phi(x))`` and compared with the corrector
``U = g(x/eps, fbar(ubar))`` built from one shared homogenized solve.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .effective import EffectiveFlux, default_p_grid, effective_f, effective_g
from .errors import ConfigError, ExperimentError, SolverError
from .flux import g_eval
from .medium import MediumRealization, MediumSpec, evaluate, sample_realization
from .profiles import Profile
from .solver import (
    Field,
    Grid1D,
    SolverConfig,
    Trajectory,
    assemble_coefficients,
    solve,
    solve_homogenized,
    well_prepared_initial,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HomogenizationConfig:
    medium: MediumSpec
    profile: Profile = field(default_factory=Profile)
    eps_list: tuple = (1 / 4, 1 / 8, 1 / 16, 1 / 32)
    M: int = 8
    seed0: int = 0
    L: float = 4.0
    cells_per_eps: int = 16
    t_end: float = 0.25
    dt: float = 2.5e-3
    n_snapshots: int = 26
    n_hom: int | None = 512  # None: homogenized solve on each eps grid
    mc_M: int = 1000
    flux_method: str = "auto"
    n_quad: int = 1024
    p_nodes: int = 513
    test_center: float = 2.0  # weak-star test bump phi_1
    test_width: float = 1.0
    max_fail_frac: float = 0.2
    seeds: tuple | None = None  # explicit seed list, overrides seed0 .. seed0 + M - 1

    def validate(self) -> "HomogenizationConfig":
        self.medium.validate()
        eps = np.asarray(self.eps_list, dtype=float)
        if eps.size == 0 or np.any(eps <= 0):
            raise ConfigError("eps_list must hold positive values")
        if np.any(np.diff(eps) >= 0):
            raise ConfigError("eps_list must be strictly decreasing")
        if np.any(eps > self.L / 8):
            raise ConfigError("every eps must be <= L/8")
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        if self.seeds is not None and len(self.seeds) != self.M:
            raise ConfigError("seeds must list exactly M entries")
        if self.n_hom is not None and self.n_hom < 4:
            raise ConfigError("n_hom must be >= 4 (or None)")
        if self.n_snapshots < 2:
            raise ConfigError("need at least 2 snapshots")
        if not self.t_end > 0 or not self.dt > 0:
            raise ConfigError("t_end and dt must be positive")
        for e in eps:
            n = self.L / e * self.cells_per_eps
            if abs(n - round(n)) > 1e-6:
                raise ConfigError(f"L * cells_per_eps / eps must be an integer (eps={e:g})")
        return self

    @property
    def snapshot_times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_snapshots)

    def grid(self, eps: float) -> Grid1D:
        return Grid1D(self.L, int(round(self.L / eps * self.cells_per_eps)))

    def seed_list(self) -> list[int]:
        return [int(s) for s in self.seeds] if self.seeds is not None else [self.seed0 + k for k in range(self.M)]

    def solver_config(self) -> SolverConfig:
        # the far field of a constant profile is its own stationary state
        p_bc = 0.0 if self.profile.compact else float(self.profile.amplitude)
        return SolverConfig(dt=self.dt, t_end=self.t_end, p_bc=p_bc)

    def e_floor(self) -> float:
        """Solver-tolerance scale of E: the Newton tolerance accumulated over the steps."""
        n_steps = math.ceil(self.t_end / self.dt - 1e-9)
        return self.solver_config().tol(1) * self.L * self.t_end * n_steps

    def effective_flux(self) -> EffectiveFlux:
        lo, hi = self.profile.bounds()
        p_grid = default_p_grid(max(abs(lo), abs(hi)), n=self.p_nodes)
        return effective_g(self.medium, p_grid, M=self.mc_M, seed0=self.seed0, method=self.flux_method, n_quad=self.n_quad)


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    E_mean: float
    E_stderr: float
    W: float
    n_cells: int
    wall_ms: float
    n_failed: int = 0
    E_samples: tuple = ()


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    rows: list
    eff: EffectiveFlux
    monotone: bool
    ratio: float  # E(eps_min) / E(eps_max)
    weak_ratio: float  # W(eps_min) / W(eps_max)
    passed: bool
    step_ok: list
    config: HomogenizationConfig | None = None

    def row_dicts(self) -> list[dict]:
        out = []
        for row, ok in zip(self.rows, self.step_ok):
            d = asdict(row)
            d.pop("E_samples")
            d["pass"] = bool(ok and self.passed)
            out.append(d)
        return out


def corrector_field(r: MediumRealization, eps: float, ubar: Field, eff: EffectiveFlux, grid: Grid1D) -> Field:
    """``U_i = g(x_i / eps, fbar(ubar_i))``."""
    u = np.asarray(ubar.u, dtype=float)
    if u.shape != (grid.n,):
        raise ConfigError("ubar must live on the given grid")
    c = evaluate(r, grid.centers / eps)
    p = effective_f(eff, u)
    return Field(np.asarray(g_eval(c, p), dtype=float) * np.ones(grid.n), ubar.t)


def _time_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    d = np.diff(times)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def _interp_rows(values: np.ndarray, x_from: np.ndarray, x_to: np.ndarray) -> np.ndarray:
    return np.stack([np.interp(x_to, x_from, row) for row in values])


def two_scale_pairing(w_family, r_family, eps: float, phi1, h_func, grid: Grid1D) -> float:
    """Mean over the family of ``h_grid * sum_i w_i phi1(x_i) h(coeffs(x_i / eps))``.

    ``w_family`` holds per-realization cell arrays (or Fields); ``h_func`` maps a
    :class:`CoefficientTriple` to per-cell weights (``None`` means ``h == 1``).
    """
    vals = []
    x = grid.centers
    base = np.asarray(phi1(x), dtype=float)
    for w, r in zip(w_family, r_family):
        wv = np.asarray(w.u if isinstance(w, Field) else w, dtype=float)
        hv = 1.0 if h_func is None else np.asarray(h_func(evaluate(r, x / eps)), dtype=float)
        vals.append(grid.h * float(np.sum(wv * base * hv)))
    if not vals:
        raise ConfigError("empty family")
    return float(np.mean(vals))


@dataclass(frozen=True, eq=False)
class _Shared:
    cfg: HomogenizationConfig
    eff: EffectiveFlux
    hom: dict  # eps -> homogenized trajectory (one shared entry under None)
    weights: np.ndarray

    def ubar(self, eps: float) -> Trajectory:
        return self.hom[None] if None in self.hom else self.hom[eps]


def _prepare(cfg: HomogenizationConfig, eff: EffectiveFlux | None = None, eps_list=None) -> _Shared:
    cfg.validate()
    if eff is None:
        eff = cfg.effective_flux()

    def run(grid):
        return solve_homogenized(eff, cfg.profile, grid, cfg.solver_config(), cfg.snapshot_times, cfg.profile.compact)

    if cfg.n_hom is not None:
        hom = {None: run(Grid1D(cfg.L, cfg.n_hom))}
    else:
        hom = {eps: run(cfg.grid(eps)) for eps in (cfg.eps_list if eps_list is None else eps_list)}
    first = next(iter(hom.values()))
    return _Shared(cfg, eff, hom, _time_weights(first.times))


def _seed_task(shared: _Shared, eps: float, k: int):
    """``(E, pairing)`` for one seed; ``None`` when the solver gives up."""
    cfg = shared.cfg
    grid = cfg.grid(eps)
    seed = cfg.seed_list()[k]
    r = sample_realization(cfg.medium, seed)
    coeffs = assemble_coefficients(r, eps, grid)
    u0 = well_prepared_initial(coeffs, cfg.profile, grid, cfg.profile.compact)
    try:
        traj = solve(u0, coeffs, cfg.solver_config(), cfg.snapshot_times)
    except SolverError as exc:
        logger.warning("eps=%g seed=%d failed: %s", eps, seed, exc)
        return None
    hom = shared.ubar(eps)
    ubar = hom.values if hom.grid == grid else _interp_rows(hom.values, hom.grid.centers, grid.centers)
    U = g_eval(coeffs.triple, effective_f(shared.eff, ubar))
    err = np.abs(traj.values - U).sum(axis=1) * grid.h
    phi1 = Profile("bump", 1.0, cfg.test_center, cfg.test_width)(grid.centers)
    pair = (traj.values - ubar) @ phi1 * grid.h
    w = shared.weights
    return float(w @ err), float(w @ pair)


def _timed(shared: _Shared, eps: float, k: int):
    t0 = time.perf_counter()
    out = _seed_task(shared, eps, k)
    return out, 1e3 * (time.perf_counter() - t0)


def l1_error(cfg: HomogenizationConfig, eps: float, eff: EffectiveFlux | None = None, threads: int = 1):
    """``(E, stderr)`` of the time-integrated L1 distance to the corrector over seeds."""
    row = _sweep_eps(_prepare(cfg, eff, [eps]), eps, threads)
    return row.E_mean, row.E_stderr


def _reduce(cfg, eps, timed) -> SweepRow:
    """``timed`` is the ordered list of ``(result, ms)`` for the seeds of one eps."""
    results = [r for r, _ in timed]
    wall_ms = float(sum(ms for _, ms in timed))
    ok = [r for r in results if r is not None]
    failed = len(results) - len(ok)
    if failed > cfg.max_fail_frac * len(results):
        raise ExperimentError(f"{failed} of {len(results)} seeds failed at eps={eps:g}")
    E = [r[0] for r in ok]
    P = [r[1] for r in ok]
    # fsum is exactly rounded, so the reduction does not depend on seed order
    mean = math.fsum(E) / len(E)
    se = math.sqrt(math.fsum((e - mean) ** 2 for e in E) / (len(E) - 1) / len(E)) if len(E) > 1 else 0.0
    W = abs(math.fsum(P) / len(P))
    return SweepRow(float(eps), mean, se, W, cfg.grid(eps).n, wall_ms, failed, tuple(E))


def _sweep_eps(shared: _Shared, eps: float, threads: int) -> SweepRow:
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        timed = list(pool.map(lambda k: _timed(shared, eps, k), range(shared.cfg.M)))
    return _reduce(shared.cfg, eps, timed)


def trend_flags(rows: list[SweepRow], floor: float = 0.0):
    """Per-row ``E_j <= E_{j-1} + sqrt(se_j^2 + se_{j-1}^2)`` and ``E(eps_min) / E(eps_max)``.

    Values below ``floor`` (the solver-tolerance scale) count as zero.
    """

    def clip(e):
        return e if e > floor else 0.0

    step_ok = [True]
    for prev, cur in zip(rows[:-1], rows[1:]):
        step_ok.append(clip(cur.E_mean) <= clip(prev.E_mean) + math.hypot(prev.E_stderr, cur.E_stderr))
    first, last = clip(rows[0].E_mean), clip(rows[-1].E_mean)
    ratio = last / first if first > 0 else (0.0 if last == 0 else math.inf)
    W0, W1 = rows[0].W, rows[-1].W
    wratio = W1 / W0 if W0 > 0 else (0.0 if W1 == 0 else math.inf)
    return step_ok, ratio, wratio


def run_homogenization(cfg: HomogenizationConfig, threads: int = 1, eff: EffectiveFlux | None = None) -> ConvergenceReport:
    """Full sweep. PASS: E non-increasing within the combined stderr and ``E(eps_min) <= E(eps_max) / 2``."""
    shared = _prepare(cfg, eff)
    tasks = [(j, eps, k) for j, eps in enumerate(cfg.eps_list) for k in range(cfg.M)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        flat = list(pool.map(lambda t: _timed(shared, t[1], t[2]), tasks))
    # ordered reduction by (eps index, seed index), independent of scheduling
    rows = [_reduce(cfg, eps, flat[j * cfg.M : (j + 1) * cfg.M]) for j, eps in enumerate(cfg.eps_list)]
    step_ok, ratio, wratio = trend_flags(rows, cfg.e_floor())
    monotone = all(step_ok)
    passed = monotone and (len(rows) == 1 or ratio <= 0.5)
    return ConvergenceReport(rows, shared.eff, monotone, ratio, wratio, passed, step_ok, cfg)
