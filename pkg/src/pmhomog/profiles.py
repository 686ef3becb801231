"""Named initial profiles ``phi(x)`` for well-prepared data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

PROFILES = ("bump", "plateau", "two_bumps", "constant")


def _bump(r):
    r = np.asarray(r, dtype=float)
    return np.where(np.abs(r) < 1.0, (1.0 - r * r) ** 3, 0.0)


def _smoothstep(s):
    # C2 transition from 0 (s <= 0) to 1 (s >= 1)
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


@dataclass(frozen=True)
class Profile:
    """``phi(x)``; ``center`` and ``width`` are in domain units."""

    name: str = "bump"
    amplitude: float = 1.0
    center: float = 2.0
    width: float = 0.5

    def __post_init__(self):
        if self.name not in PROFILES:
            raise ConfigError(f"unknown profile {self.name!r}; expected one of {PROFILES}")
        if self.name != "constant" and not self.width > 0:
            raise ConfigError("profile width must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        A, c, w = self.amplitude, self.center, self.width
        if self.name == "bump":
            return A * _bump((x - c) / w)
        if self.name == "plateau":
            s = 1.0 - np.abs(x - c) / w  # 1 at the centre, 0 at the support edge
            return A * _smoothstep(2.0 * s)
        if self.name == "two_bumps":
            return A * _bump((x - c + w) / (0.5 * w)) - 0.5 * A * _bump((x - c - w) / (0.5 * w))
        return np.full(x.shape, float(A))

    @property
    def sup(self) -> float:
        return abs(self.amplitude)

    @property
    def compact(self) -> bool:
        return self.name != "constant"

    def bounds(self) -> tuple[float, float]:
        """``(min phi, max phi)``."""
        A = self.amplitude
        if self.name == "two_bumps":
            return (min(A, -0.5 * A, 0.0), max(A, -0.5 * A, 0.0))
        if self.name == "constant":
            return (A, A)
        return (min(A, 0.0), max(A, 0.0))
