"""Effective flux from the averaged inverse.

``gbar(p) = E[g(omega, p)]`` is tabulated on a ``p`` grid; the effective flux
``fbar`` is its inverse. Three ways to average over ``omega``:

* ``exact``  finite-atom measures (``constant``/``atoms`` media); ``gbar`` is
  additionally evaluated exactly at arbitrary ``p``.
* ``torus``  periodic media: midpoint quadrature of the uniform translation
  measure over one period.
* ``mc``     Monte-Carlo over seeds, with per-node standard errors.

Off-node values of a table come from one monotone cubic Hermite interpolant of
the pairs ``(gbar_k, p_k)``, i.e. of ``fbar`` on the nodes ``v_k = gbar(p_k)``,
with slopes ``1 / gbar'(p_k)`` limited by the Fritsch-Carlson conditions.
``gbar`` between nodes is the exact inverse of that interpolant. ``gbar`` has
power-type singularities where ``p`` hits a flux offset ``b``; ``fbar`` is
locally Lipschitz, so interpolating in this orientation stays accurate there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .flux import CAP, CoefficientTriple, dg_dp, g_eval
from .medium import MediumSpec, ensemble_triples, evaluate, reference_realization


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite probability measure on coefficient triples."""

    triples: CoefficientTriple  # arrays of length K
    weights: np.ndarray

    def gbar(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return g_eval(self.triples, p[..., None]) @ self.weights

    def dgbar(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.minimum(dg_dp(self.triples, p[..., None]) @ self.weights, CAP)


def _limit_slopes(x: np.ndarray, y: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Fritsch-Carlson limiter: keeps the Hermite interpolant monotone."""
    d = np.maximum(np.asarray(d, dtype=float), 0.0).copy()
    delta = np.diff(y) / np.diff(x)
    for _ in range(2):
        alpha = d[:-1] / delta
        beta = d[1:] / delta
        r = alpha**2 + beta**2
        tau = np.where(r > 9.0, 3.0 / np.sqrt(np.where(r > 9.0, r, 1.0)), 1.0)
        d[:-1] = np.minimum(d[:-1], tau * alpha * delta)
        d[1:] = np.minimum(d[1:], tau * beta * delta)
    return d


def _pchip_slopes(x, y):
    from scipy.interpolate import PchipInterpolator

    return PchipInterpolator(x, y).derivative()(x)


class _MonotoneCubic:
    """Monotone piecewise cubic through ``(x_k, y_k)`` with linear extension."""

    def __init__(self, x, y, slopes):
        self.x, self.y = x, y
        d = _limit_slopes(x, y, slopes)
        hk = np.diff(x)
        dy = np.diff(y)
        m0, m1 = hk * d[:-1], hk * d[1:]
        # y(t) = c0 + c1 t + c2 t^2 + c3 t^3 on each segment, t in [0, 1]
        self.c = (y[:-1], m0, 3 * dy - 2 * m0 - m1, -2 * dy + m0 + m1)
        self.hk = hk
        self.lo_slope = dy[0] / hk[0]
        self.hi_slope = dy[-1] / hk[-1]

    def _locate(self, xq):
        k = np.clip(np.searchsorted(self.x, xq, side="right") - 1, 0, self.x.size - 2)
        return k, (xq - self.x[k]) / self.hk[k]

    def __call__(self, xq):
        c0, c1, c2, c3 = self.c
        k, t = self._locate(xq)
        inside = c0[k] + t * (c1[k] + t * (c2[k] + t * c3[k]))
        lo = self.y[0] + self.lo_slope * (xq - self.x[0])
        hi = self.y[-1] + self.hi_slope * (xq - self.x[-1])
        return np.where(xq < self.x[0], lo, np.where(xq > self.x[-1], hi, inside))

    def derivative(self, xq):
        _, c1, c2, c3 = self.c
        k, t = self._locate(xq)
        inside = (c1[k] + t * (2 * c2[k] + 3 * t * c3[k])) / self.hk[k]
        return np.where(xq < self.x[0], self.lo_slope, np.where(xq > self.x[-1], self.hi_slope, inside))

    def solve(self, yq):
        """``x`` with ``self(x) == yq``; bracketed Newton on the located segment."""
        x, y = self.x, self.y
        out = np.empty_like(yq)
        below, above = yq < y[0], yq > y[-1]
        out[below] = x[0] + (yq[below] - y[0]) / self.lo_slope
        out[above] = x[-1] + (yq[above] - y[-1]) / self.hi_slope
        mid = ~(below | above)
        if mid.any():
            v = yq[mid]
            k = np.clip(np.searchsorted(y, v, side="right") - 1, 0, x.size - 2)
            c0, c1, c2, c3 = (c[k] for c in self.c)
            c0 = c0 - v
            lo = np.zeros_like(v)
            hi = np.ones_like(v)
            span = np.abs(c0) + np.abs(c1) + np.abs(c2) + np.abs(c3) + np.abs(v)
            rise = c1 + c2 + c3
            t = np.clip(-c0 / np.where(rise > 0, rise, 1.0), 0.0, 1.0)
            for _ in range(100):
                r = c0 + t * (c1 + t * (c2 + t * c3))
                lo = np.where(r < 0, t, lo)
                hi = np.where(r > 0, t, hi)
                done = (np.abs(r) <= 1e-16 * span) | (hi - lo <= 1e-15)
                if done.all():
                    break
                dr = c1 + t * (2 * c2 + 3 * t * c3)
                with np.errstate(divide="ignore", invalid="ignore"):
                    tn = t - r / dr
                bad = ~np.isfinite(tn) | (tn <= lo) | (tn >= hi)
                t = np.where(done, t, np.where(bad, 0.5 * (lo + hi), tn))
            out[mid] = x[k] + t * self.hk[k]
        return out


@dataclass(frozen=True, eq=False)
class EffectiveFlux:
    p_grid: np.ndarray
    gbar_values: np.ndarray
    stderr: np.ndarray
    dgbar_values: np.ndarray | None = None
    measure: AtomicMeasure | None = None
    method: str = "table"

    def __post_init__(self):
        p = np.asarray(self.p_grid, dtype=float)
        g = np.asarray(self.gbar_values, dtype=float)
        if p.ndim != 1 or p.size < 2 or np.any(np.diff(p) <= 0):
            raise ConfigError("p_grid must be strictly increasing with >= 2 nodes")
        if g.shape != p.shape:
            raise ConfigError("gbar_values must match p_grid")
        if np.any(np.diff(g) <= 0):
            raise NumericalError("tabulated gbar is not strictly increasing")
        if self.dgbar_values is not None:
            slopes = 1.0 / np.maximum(np.asarray(self.dgbar_values, dtype=float), 1e-300)
        else:
            slopes = _pchip_slopes(g, p)
        object.__setattr__(self, "_inverse", _MonotoneCubic(g, p, slopes))

    def gbar(self, p):
        """``gbar`` at arbitrary ``p`` (exact when a finite measure is attached)."""
        if self.measure is not None:
            return self.measure.gbar(p)
        p = np.asarray(p, dtype=float)
        out = self._inverse.solve(np.atleast_1d(p).ravel())
        return out.reshape(p.shape) if p.ndim else float(out[0])

    def dgbar(self, p):
        if self.measure is not None:
            return self.measure.dgbar(p)
        return 1.0 / np.maximum(self._inverse.derivative(np.asarray(self.gbar(p), dtype=float)), 1.0 / CAP)

    def fbar(self, v, tol: float = 1e-10):
        return effective_f(self, v, tol=tol)

    def dfbar(self, v):
        """Derivative of the effective flux at ``v``."""
        v = np.asarray(v, dtype=float)
        if self.measure is not None:
            return 1.0 / np.maximum(self.measure.dgbar(self.fbar(v)), 1.0 / CAP)
        return self._inverse.derivative(v)

    def fbar_and_slope(self, v):
        p = np.asarray(self.fbar(v))
        if self.measure is not None:
            return p, 1.0 / np.maximum(self.measure.dgbar(p), 1.0 / CAP)
        return p, self._inverse.derivative(np.asarray(v, dtype=float))


def default_p_grid(phi_max: float, n: int = 513, margin: float = 0.2) -> np.ndarray:
    """``n`` uniform nodes on ``[-P, P]`` with ``P = (1 + margin) * phi_max``."""
    P = (1.0 + margin) * max(abs(phi_max), 1e-12)
    return np.linspace(-P, P, n)


def exact_measure(spec: MediumSpec) -> AtomicMeasure | None:
    if spec.kind == "atoms":
        atoms = np.asarray(spec.atoms, dtype=float)
        return AtomicMeasure(CoefficientTriple(atoms[:, 0], atoms[:, 1], atoms[:, 2]), spec.atom_weights())
    if spec.kind == "constant":
        c = evaluate(reference_realization(spec), 0.0 if spec.dimension == 1 else np.zeros(2))
        return AtomicMeasure(CoefficientTriple(np.array([c.a]), np.array([c.b]), np.array([c.gamma])), np.ones(1))
    return None


def torus_measure(spec: MediumSpec, n_quad: int) -> AtomicMeasure:
    """Midpoint quadrature of the translation-invariant measure of a periodic medium."""
    r = reference_realization(spec)
    nodes = (np.arange(n_quad) + 0.5) * (spec.period / n_quad)
    if spec.dimension == 2:
        gx, gy = np.meshgrid(nodes, nodes, indexing="ij")
        nodes = np.stack([gx.ravel(), gy.ravel()], axis=1)
    c = evaluate(r, nodes)
    k = len(nodes)

    def as_arr(v):
        return np.broadcast_to(np.asarray(v, dtype=float), (k,)).copy()

    return AtomicMeasure(CoefficientTriple(as_arr(c.a), as_arr(c.b), as_arr(c.gamma)), np.full(k, 1.0 / k))


def effective_g(
    spec: MediumSpec,
    p_grid=None,
    M: int = 1000,
    seed0: int = 0,
    method: str = "auto",
    n_quad: int = 1024,
) -> EffectiveFlux:
    """Tabulate ``gbar`` on ``p_grid`` by averaging the pointwise inverse over the medium law.

    ``method='auto'`` picks ``exact`` for finite measures, ``torus`` for periodic
    media and ``mc`` otherwise. ``stderr`` holds Monte-Carlo standard errors (mc)
    or the difference to a half-resolution quadrature (torus).
    """
    spec.validate()
    p_grid = np.asarray(p_grid if p_grid is not None else default_p_grid(1.0), dtype=float)
    if p_grid.ndim != 1 or p_grid.size < 2 or np.any(np.diff(p_grid) <= 0):
        raise ConfigError("p_grid must be strictly increasing with >= 2 nodes")
    if method == "auto":
        method = "exact" if spec.kind in ("constant", "atoms") else "torus" if spec.kind == "periodic" else "mc"

    if method == "exact":
        measure = exact_measure(spec)
        if measure is None:
            raise ConfigError(f"no exact measure for medium kind {spec.kind!r}")
        return EffectiveFlux(p_grid, measure.gbar(p_grid), np.zeros_like(p_grid), measure.dgbar(p_grid), measure, "exact")
    if method == "torus":
        if spec.kind not in ("periodic", "constant"):
            raise ConfigError("torus quadrature needs a periodic medium")
        fine = torus_measure(spec, n_quad)
        coarse = torus_measure(spec, max(n_quad // 2, 1))
        g = fine.gbar(p_grid)
        return EffectiveFlux(p_grid, g, np.abs(g - coarse.gbar(p_grid)), fine.dgbar(p_grid), None, "torus")
    if method == "mc":
        if M < 2:
            raise ConfigError("Monte-Carlo effective flux needs M >= 2")
        t = ensemble_triples(spec, M, seed0)
        cols = CoefficientTriple(t.a[:, None], t.b[:, None], t.gamma[:, None])
        samples = g_eval(cols, p_grid)
        mean = samples.mean(axis=0)
        se = samples.std(axis=0, ddof=1) / math.sqrt(M)
        # every sample path is increasing in p, so a violation here is a bug
        if np.any(np.diff(mean) <= 0):
            raise NumericalError("Monte-Carlo gbar lost monotonicity")
        slopes = np.minimum(dg_dp(cols, p_grid).mean(axis=0), CAP)
        return EffectiveFlux(p_grid, mean, se, slopes, None, "mc")
    raise ConfigError(f"unknown effective flux method {method!r}")


def effective_f(eff: EffectiveFlux, v, tol: float = 1e-10):
    """Effective flux ``fbar(v)``, the ``p`` solving ``gbar(p) = v``.

    Tables: monotone interpolant of ``fbar`` on the nodes ``gbar_k``. Exact
    measures: bracketed Newton on the exact ``gbar``, the bracket found from
    the table and expanded geometrically beyond it.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ConfigError("effective_f needs finite input")
    scalar = v.ndim == 0
    v1 = np.atleast_1d(v).ravel()
    if eff.measure is None:
        p = eff._inverse(v1)
        return float(p[0]) if scalar else p.reshape(v.shape)

    x, y = eff.p_grid, eff.gbar_values
    k = np.clip(np.searchsorted(y, v1, side="right") - 1, 0, x.size - 2)
    lo, hi = x[k].copy(), x[k + 1].copy()
    width = x[-1] - x[0]
    below, above = v1 < y[0], v1 > y[-1]
    if below.any() or above.any():
        lo = np.where(below, x[0] - width, np.where(above, x[-1], lo))
        hi = np.where(below, x[0], np.where(above, x[-1] + width, hi))
        step = width
        for _ in range(200):
            need_lo = eff.gbar(lo) > v1
            need_hi = eff.gbar(hi) < v1
            if not (need_lo.any() or need_hi.any()):
                break
            step *= 2.0
            lo = np.where(need_lo, lo - step, lo)
            hi = np.where(need_hi, hi + step, hi)
    # Newton steps leaving the bracket are replaced by bisection
    glo, ghi = eff.gbar(lo), eff.gbar(hi)
    p = lo + (v1 - glo) / np.maximum(ghi - glo, 1e-300) * (hi - lo)
    atol = min(tol, 1e-10) * 1e-4 * (1.0 + np.abs(v1))
    for _ in range(200):
        res = eff.gbar(p) - v1
        lo = np.where(res < 0, p, lo)
        hi = np.where(res > 0, p, hi)
        # relative width: g is steep near p = 0, so an absolute width would cost digits in g
        done = (np.abs(res) <= atol) | (hi - lo <= 4e-16 * np.maximum(np.abs(lo), np.abs(hi)))
        if done.all():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            pn = p - res / eff.dgbar(p)
        bad = ~np.isfinite(pn) | (pn <= lo) | (pn >= hi)
        p = np.where(done, p, np.where(bad, 0.5 * (lo + hi), pn))
    return float(p[0]) if scalar else p.reshape(v.shape)


@dataclass(frozen=True)
class FbarReport:
    monotone: bool
    violations: int
    lipschitz: float
    n_points: int
    v_min: float
    v_max: float


def check_fbar_properties(eff: EffectiveFlux, v_grid) -> FbarReport:
    """Monotonicity and local Lipschitz bound of ``fbar`` sampled on ``v_grid``."""
    v = np.asarray(v_grid, dtype=float)
    if v.size < 2:
        lo = float(v[0]) if v.size else math.nan
        return FbarReport(True, 0, 0.0, int(v.size), lo, lo)
    fb = effective_f(eff, v)
    df = np.diff(fb)
    violations = int(np.sum(df <= 0))
    lip = float(np.max(np.abs(df) / np.diff(v)))
    return FbarReport(violations == 0 and bool(np.isfinite(lip)), violations, lip, int(v.size), float(v[0]), float(v[-1]))
