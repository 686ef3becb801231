"""Pointwise porous-medium flux ``f(u) = a u |u|^gamma + b`` and its inverse.

All routines broadcast over numpy arrays: a :class:`CoefficientTriple` may
hold scalars or per-cell arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

#: value returned by :func:`dg_dp` at the singular point ``p == b``
CAP = 1e12


@dataclass(frozen=True, eq=False)
class CoefficientTriple:
    """Coefficients ``(a, b, gamma)`` of the model flux at one or many points."""

    a: np.ndarray | float
    b: np.ndarray | float
    gamma: np.ndarray | float

    def validate(self) -> "CoefficientTriple":
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        g = np.asarray(self.gamma, dtype=float)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(g))):
            raise ConfigError("coefficient triple contains non-finite values")
        if np.any(a <= 0.0):
            raise ConfigError("flux amplitude a must be positive")
        if np.any(g <= 0.0):
            raise ConfigError("flux exponent gamma must be positive")
        return self

    def __getitem__(self, idx) -> "CoefficientTriple":
        return CoefficientTriple(
            np.asarray(self.a)[idx], np.asarray(self.b)[idx], np.asarray(self.gamma)[idx]
        )

    def __len__(self) -> int:
        return int(np.size(self.a))

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.asarray(self.a, dtype=float),
            np.asarray(self.b, dtype=float),
            np.asarray(self.gamma, dtype=float),
        )


def f_eval(c: CoefficientTriple, u):
    """Flux value ``a u |u|^gamma + b``."""
    u = np.asarray(u, dtype=float)
    return c.a * u * np.abs(u) ** c.gamma + c.b


def df_du(c: CoefficientTriple, u):
    """Derivative ``a (1 + gamma) |u|^gamma`` (non-negative, zero at u = 0)."""
    u = np.asarray(u, dtype=float)
    return c.a * (1.0 + c.gamma) * np.abs(u) ** c.gamma


def g_eval(c: CoefficientTriple, p):
    """Inverse flux: the unique ``u`` with ``f_eval(c, u) == p``."""
    s = (np.asarray(p, dtype=float) - c.b) / c.a
    return np.sign(s) * np.abs(s) ** (1.0 / (1.0 + c.gamma))


def dg_dp(c: CoefficientTriple, p, cap: float = CAP):
    """Derivative of :func:`g_eval` in ``p``; clamped to ``cap`` where it blows up."""
    s = np.abs((np.asarray(p, dtype=float) - c.b) / c.a)
    beta = 1.0 / (1.0 + c.gamma)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = beta * s ** (beta - 1.0) / c.a
    d = np.where(np.isfinite(d), d, cap)
    return np.minimum(d, cap)


def invert_monotone(func, p, lo: float = -1.0, hi: float = 1.0, tol: float = 1e-14, max_iter: int = 200):
    """Vectorised bisection for ``func(u) == p`` with ``func`` strictly increasing.

    The bracket ``[lo, hi]`` is doubled until it encloses every target, so any
    monotone flux with ``func(u) -> +-inf`` can be inverted.
    """
    p = np.asarray(p, dtype=float)
    lo = np.full(p.shape, float(lo))
    hi = np.full(p.shape, float(hi))
    for _ in range(200):
        bad = func(lo) > p
        if not bad.any():
            break
        lo = np.where(bad, 2.0 * lo - np.abs(hi - lo) - 1.0, lo)
    for _ in range(200):
        bad = func(hi) < p
        if not bad.any():
            break
        hi = np.where(bad, 2.0 * hi + np.abs(hi - lo) + 1.0, hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        up = func(mid) < p
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.all(hi - lo <= tol * (1.0 + np.abs(mid))):
            break
    return 0.5 * (lo + hi)
