"""Stationary ergodic coefficient fields built from finite trigonometric sums.

A realization ``omega`` is identified with a seed of a counter-based RNG
(Philox); the shift group acts by translating the evaluation point, so
``evaluate(shift(r, z), y) == evaluate(r, y + z)`` holds by construction.

Four kinds are supported:

``constant``
    a single deterministic triple (midpoints of the ranges).
``periodic``
    integer harmonics of ``1/period``; the ensemble is a uniform random
    translation on the torus.
``almost_periodic``
    incommensurate frequencies; the ensemble is a uniform random point of the
    hull (one phase per frequency, shared by the three coefficients).
``random_fourier``
    per-coefficient random frequencies and phases drawn from the seed.

A fifth kind, ``atoms``, describes a finite probability measure on triples
(each realization is spatially constant). It is not ergodic and exists so that
averages like the effective flux can be computed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigError
from .flux import CoefficientTriple

KINDS = ("constant", "periodic", "almost_periodic", "random_fourier", "atoms")
COEFFS = ("a", "b", "gamma")

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
AP_FREQUENCIES = (1.0, math.sqrt(2.0), math.sqrt(3.0), GOLDEN, math.sqrt(5.0), math.sqrt(7.0), math.sqrt(11.0))

# phase offset between the a, b and gamma fields sharing one frequency set
_COEFF_OFFSET = 2.0 * math.pi / 3.0


def philox(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream)``."""
    key = (int(seed) & 0xFFFFFFFFFFFFFFFF) | ((int(stream) & 0xFFFFFFFF) << 64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class MediumSpec:
    kind: str = "constant"
    dimension: int = 1
    a_range: tuple[float, float] = (1.0, 1.0)
    b_range: tuple[float, float] = (0.0, 0.0)
    gamma_range: tuple[float, float] = (1.0, 1.0)
    modes: int = 1
    frequencies: tuple | None = None
    amplitudes: tuple | None = None
    period: float = 1.0
    freq_band: tuple[float, float] = (0.5, 1.5)
    atoms: tuple | None = None
    weights: tuple | None = None

    def validate(self) -> "MediumSpec":
        if self.kind not in KINDS:
            raise ConfigError(f"unknown medium kind {self.kind!r}; expected one of {KINDS}")
        if self.dimension not in (1, 2):
            raise ConfigError("medium dimension must be 1 or 2")
        if self.kind == "atoms":
            if not self.atoms:
                raise ConfigError("atoms medium needs a non-empty atoms list")
            atoms = np.asarray(self.atoms, dtype=float)
            if atoms.ndim != 2 or atoms.shape[1] != 3:
                raise ConfigError("atoms must be a list of (a, b, gamma) triples")
            if np.any(atoms[:, 0] <= 0) or np.any(atoms[:, 2] <= 0):
                raise ConfigError("atoms need a > 0 and gamma > 0")
            w = self.atom_weights()
            if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
                raise ConfigError("atom weights must be non-negative and sum to 1")
            return self
        for name, (lo, hi) in zip(COEFFS, (self.a_range, self.b_range, self.gamma_range)):
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise ConfigError(f"{name}_range must be finite with lo <= hi, got {(lo, hi)}")
        if self.a_range[0] <= 0:
            raise ConfigError(f"a_range lower bound must be > 0, got {self.a_range[0]}")
        if self.gamma_range[0] <= 0:
            raise ConfigError(f"gamma_range lower bound must be > 0, got {self.gamma_range[0]}")
        if self.kind != "constant" and self.modes < 1:
            raise ConfigError("modes must be >= 1")
        if self.period <= 0:
            raise ConfigError("period must be positive")
        return self

    def atom_weights(self) -> np.ndarray:
        n = len(self.atoms)
        if self.weights is None:
            return np.full(n, 1.0 / n)
        return np.asarray(self.weights, dtype=float)

    def ranges(self) -> dict[str, tuple[float, float]]:
        if self.kind == "atoms":
            atoms = np.asarray(self.atoms, dtype=float)
            return {c: (float(atoms[:, j].min()), float(atoms[:, j].max())) for j, c in enumerate(COEFFS)}
        return dict(zip(COEFFS, (tuple(self.a_range), tuple(self.b_range), tuple(self.gamma_range))))

    @property
    def ergodic(self) -> bool:
        return self.kind != "atoms"


@dataclass(frozen=True)
class ModeSet:
    """``sum_k A_k sin(2 pi k.y + theta_k)``, normalised by ``sum |A_k|``."""

    amplitudes: np.ndarray
    wavevectors: np.ndarray  # (K, d), cycles per unit length
    phases: np.ndarray

    def __call__(self, y: np.ndarray) -> np.ndarray:
        arg = 2.0 * np.pi * (y @ self.wavevectors.T) + self.phases
        return (np.sin(arg) @ self.amplitudes) / np.abs(self.amplitudes).sum()


@dataclass(frozen=True, eq=False)
class MediumRealization:
    spec: MediumSpec
    seed: int
    modes: dict = field(default_factory=dict)  # coeff name -> ModeSet
    constants: dict = field(default_factory=dict)  # coeff name -> float
    base_shift: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @property
    def label(self) -> str:
        return f"{self.spec.kind}:{self.seed}"


def _default_amplitudes(spec: MediumSpec, n: int) -> np.ndarray:
    if spec.amplitudes is not None:
        amps = np.asarray(spec.amplitudes, dtype=float)
        if amps.size != n:
            raise ConfigError(f"expected {n} amplitudes, got {amps.size}")
        return amps
    return 1.0 / np.arange(1, n + 1)


def _unit_directions(n: int, dim: int, angles=None) -> np.ndarray:
    if dim == 1:
        return np.ones((n, 1))
    if angles is None:
        angles = np.arange(n) * math.pi * (3.0 - math.sqrt(5.0))
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def _build(spec: MediumSpec, seed: int, randomize: bool) -> MediumRealization:
    d = spec.dimension
    rng = philox(seed)
    ranges = spec.ranges()
    modes: dict[str, ModeSet] = {}
    constants: dict[str, float] = {}

    if spec.kind == "atoms":
        atoms = np.asarray(spec.atoms, dtype=float)
        k = int(rng.choice(len(atoms), p=spec.atom_weights())) if randomize else 0
        constants = dict(zip(COEFFS, (float(v) for v in atoms[k])))
        return MediumRealization(spec, seed, {}, constants, np.zeros(d))

    for c in COEFFS:
        lo, hi = ranges[c]
        if lo == hi or spec.kind == "constant":
            constants[c] = 0.5 * (lo + hi)

    if spec.kind == "periodic":
        m = np.arange(1, spec.modes + 1, dtype=float)
        if d == 1:
            wv = (m / spec.period)[:, None]
        else:
            wv = np.concatenate([np.stack([m, 0 * m], 1), np.stack([0 * m, m], 1)]) / spec.period
        torus_point = rng.random(d) * spec.period if randomize else np.zeros(d)
        base = 2.0 * np.pi * (wv @ torus_point)
        amps = _default_amplitudes(spec, spec.modes)
        if d == 2:
            amps = np.concatenate([amps, amps])
        for j, c in enumerate(COEFFS):
            if c not in constants:
                modes[c] = ModeSet(amps, wv, base + j * _COEFF_OFFSET)
    elif spec.kind == "almost_periodic":
        freqs = np.asarray(spec.frequencies if spec.frequencies is not None else AP_FREQUENCIES[: spec.modes], dtype=float)
        if freqs.size < spec.modes:
            raise ConfigError(f"almost_periodic medium needs {spec.modes} frequencies")
        freqs = freqs[: spec.modes]
        wv = freqs[:, None] * _unit_directions(spec.modes, d)
        hull_point = rng.random(spec.modes) * 2.0 * np.pi if randomize else np.zeros(spec.modes)
        amps = _default_amplitudes(spec, spec.modes)
        for j, c in enumerate(COEFFS):
            if c not in constants:
                modes[c] = ModeSet(amps, wv, hull_point + j * _COEFF_OFFSET)
    elif spec.kind == "random_fourier":
        lo_f, hi_f = spec.freq_band
        amps = _default_amplitudes(spec, spec.modes)
        for j, c in enumerate(COEFFS):
            sub = philox(seed, stream=j + 1)
            freqs = sub.uniform(lo_f, hi_f, spec.modes)
            angles = sub.uniform(0.0, 2.0 * np.pi, spec.modes) if d == 2 else None
            phases = sub.uniform(0.0, 2.0 * np.pi, spec.modes)
            if not randomize:
                phases = np.zeros(spec.modes)
            if c not in constants:
                modes[c] = ModeSet(amps, freqs[:, None] * _unit_directions(spec.modes, d, angles), phases)
    return MediumRealization(spec, seed, modes, constants, np.zeros(d))


def sample_realization(spec: MediumSpec, seed: int) -> MediumRealization:
    """Draw the realization ``omega`` attached to ``seed``."""
    spec.validate()
    return _build(spec, int(seed), randomize=True)


def reference_realization(spec: MediumSpec) -> MediumRealization:
    """Realization with all random phases zero (the identity of the hull).

    For a single-mode periodic medium on ``a_range=(1.5, 2.5)`` this is
    ``a(y) = 2 + 0.5 sin(2 pi y)``.
    """
    spec.validate()
    return _build(spec, 0, randomize=False)


def _as_points(y, dim: int) -> tuple[np.ndarray, tuple]:
    y = np.asarray(y, dtype=float)
    if dim == 1:
        shape = y.shape
        return y.reshape(-1, 1), shape
    if y.shape[-1] != dim:
        raise ConfigError(f"points must have trailing dimension {dim}")
    shape = y.shape[:-1]
    return y.reshape(-1, dim), shape


def evaluate(r: MediumRealization, y) -> CoefficientTriple:
    """Coefficients at ``y`` (scalar or array; trailing axis = dimension in 2D)."""
    pts, shape = _as_points(y, r.spec.dimension)
    pts = pts + r.base_shift
    ranges = r.spec.ranges()
    out = []
    for c in COEFFS:
        if c in r.constants:
            vals = np.full(pts.shape[0], r.constants[c])
        else:
            lo, hi = ranges[c]
            vals = 0.5 * (lo + hi) + 0.5 * (hi - lo) * r.modes[c](pts)
        out.append(vals.reshape(shape) if shape else float(vals[0]))
    return CoefficientTriple(*out)


def shift(r: MediumRealization, z) -> MediumRealization:
    """``T(z) omega``: the same medium seen from a point translated by ``z``."""
    z = np.broadcast_to(np.asarray(z, dtype=float), r.base_shift.shape)
    return replace(r, base_shift=r.base_shift + z)


def _stack(triples: list[CoefficientTriple]) -> CoefficientTriple:
    return CoefficientTriple(
        np.array([t.a for t in triples], dtype=float),
        np.array([t.b for t in triples], dtype=float),
        np.array([t.gamma for t in triples], dtype=float),
    )


def ensemble_triples(spec: MediumSpec, M: int, seed0: int = 0) -> CoefficientTriple:
    """Coefficients at the origin for realizations ``seed0 .. seed0 + M - 1``."""
    origin = np.zeros(spec.dimension) if spec.dimension > 1 else 0.0
    return _stack([evaluate(sample_realization(spec, seed0 + k), origin) for k in range(M)])


def ensemble_mean(
    spec: MediumSpec, h: Callable[[CoefficientTriple], np.ndarray], M: int, seed0: int = 0
) -> tuple[float, float]:
    """Monte-Carlo mean of ``h(omega)`` and its standard error.

    ``h`` receives a triple of length-``M`` arrays and must act elementwise.
    """
    if M < 2:
        raise ConfigError("ensemble_mean needs M >= 2")
    vals = np.broadcast_to(np.asarray(h(ensemble_triples(spec, M, seed0)), dtype=float), (M,))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(M))


def spatial_mean(r: MediumRealization, h: Callable[[CoefficientTriple], np.ndarray], R: float, n_points: int) -> float:
    """Midpoint-rule average of ``h(evaluate(r, y))`` over the box ``[0, R]^d``."""
    if R <= 0 or n_points < 2:
        raise ConfigError("spatial_mean needs R > 0 and n_points >= 2")
    nodes = (np.arange(n_points) + 0.5) * (R / n_points)
    if r.spec.dimension == 2:
        gx, gy = np.meshgrid(nodes, nodes, indexing="ij")
        nodes = np.stack([gx.ravel(), gy.ravel()], axis=1)
    vals = np.broadcast_to(np.asarray(h(evaluate(r, nodes)), dtype=float), (len(nodes),))
    return float(vals.mean())


def min_frequency(r: MediumRealization) -> float:
    """Smallest wave number present in the realization (inf for constant media)."""
    ks = [np.linalg.norm(m.wavevectors, axis=1).min() for m in r.modes.values()]
    return float(min(ks)) if ks else math.inf
