"""Flat ``key = value`` run configuration.

One setting per line, ``#`` starts a comment, keys are namespaced
(``medium.*``, ``flux.*``, ``solver.*``, ``experiment.*``, ``output.*``).
Unknown keys are rejected. Tuples are written ``1, 3`` or ``(1, 3)``; atom
lists as ``1,0,1; 4,0,1``. A ``report.json`` written by ``homogenize`` can be
used as a config file as well (its ``config`` entry is read).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .experiment import HomogenizationConfig
from .medium import MediumSpec
from .profiles import Profile
from .solver import SolverConfig


def _float(s):
    try:
        v = float(s)
    except (TypeError, ValueError):
        raise ValueError(f"not a number: {s!r}") from None
    return v


def _int(s):
    v = _float(s)
    if not float(v).is_integer():
        raise ValueError(f"not an integer: {s!r}")
    return int(v)


def _bool(s):
    if isinstance(s, bool):
        return s
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _str(s):
    return str(s).strip()


def _floats(s):
    if isinstance(s, (list, tuple)):
        return tuple(_float(v) for v in s)
    t = str(s).strip().strip("()[]")
    if not t:
        return ()
    return tuple(_float(v) for v in t.split(","))


def _pair(s):
    v = _floats(s)
    if len(v) != 2:
        raise ValueError(f"expected two numbers, got {s!r}")
    return v


def _eps_list(s):
    if isinstance(s, (list, tuple)):
        return tuple(_float(v) for v in s)
    out = []
    for tok in str(s).strip().strip("()[]").split(","):
        tok = tok.strip()
        if "/" in tok:
            num, den = tok.split("/")
            out.append(_float(num) / _float(den))
        else:
            out.append(_float(tok))
    return tuple(out)


def _atoms(s):
    if isinstance(s, (list, tuple)):
        rows = [tuple(_float(v) for v in r) for r in s]
    else:
        rows = [_floats(part) for part in str(s).split(";") if part.strip()]
    if any(len(r) != 3 for r in rows):
        raise ValueError("atoms must be (a, b, gamma) triples separated by ';'")
    return tuple(rows)


def _opt(parser):
    def parse(s):
        if s is None or (isinstance(s, str) and s.strip().lower() in ("", "none")):
            return None
        return parser(s)

    return parse


REQUIRED = object()

# key -> (parser, default)
SCHEMA: dict[str, tuple] = {
    "medium.kind": (_str, REQUIRED),
    "medium.dimension": (_int, 1),
    "medium.a_range": (_pair, (1.0, 1.0)),
    "medium.b_range": (_pair, (0.0, 0.0)),
    "medium.gamma_range": (_pair, (1.0, 1.0)),
    "medium.modes": (_int, 1),
    "medium.seed": (_int, 0),
    "medium.period": (_float, 1.0),
    "medium.frequencies": (_opt(_floats), None),
    "medium.amplitudes": (_opt(_floats), None),
    "medium.freq_band": (_pair, (0.5, 1.5)),
    "medium.atoms": (_opt(_atoms), None),
    "medium.weights": (_opt(_floats), None),
    "flux.method": (_str, "auto"),
    "flux.p_nodes": (_int, 513),
    "flux.p_max": (_opt(_float), None),
    "flux.M": (_int, 1000),
    "flux.n_quad": (_int, 1024),
    "flux.v_points": (_int, 1001),
    "flux.v_max": (_float, 2.0),
    "solver.L": (_float, 4.0),
    "solver.n": (_opt(_int), None),
    "solver.eps": (_float, 0.125),
    "solver.cells_per_eps": (_float, 16.0),
    "solver.dt": (_float, 2.5e-3),
    "solver.t_end": (_float, 0.25),
    "solver.bc": (_str, "dirichlet_stationary"),
    "solver.p_bc": (_float, 0.0),
    "solver.newton_tol": (_opt(_float), None),
    "solver.newton_max": (_int, 50),
    "solver.snapshots": (_int, 26),
    "experiment.profile": (_str, "bump"),
    "experiment.amplitude": (_float, 1.0),
    "experiment.center": (_float, 2.0),
    "experiment.width": (_float, 0.5),
    "experiment.eps_list": (_eps_list, (1 / 4, 1 / 8, 1 / 16, 1 / 32)),
    "experiment.M": (_int, 8),
    "experiment.n_hom": (_opt(_int), 512),  # none: homogenized solve on each eps grid
    "experiment.test_center": (_float, 2.0),
    "experiment.test_width": (_float, 1.0),
    "experiment.p_bins": (_int, 44),
    "experiment.kinetic_p": (_float, 0.3),
    "experiment.sigma": (_float, 0.1),
    "experiment.xi_center": (_float, 0.45),
    "experiment.xi_width": (_float, 0.3),
    "experiment.inject_defect_factor": (_float, 1.0),
    "output.record_timing": (_bool, False),
    "output.plot": (_bool, False),
}


def _parse_value(key: str, raw):
    parser, _ = SCHEMA[key]
    try:
        return parser(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def parse_mapping(mapping: dict, source: str = "<config>") -> dict:
    values = {}
    for key, raw in mapping.items():
        if key not in SCHEMA:
            raise ConfigError(f"{source}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


@dataclass
class RunConfig:
    values: dict
    out_dir: Path = Path(".")
    verbosity: int = 0
    explicit: set = field(default_factory=set)

    @classmethod
    def from_values(cls, values: dict, out_dir=".", verbosity=0) -> "RunConfig":
        for key, (_, default) in SCHEMA.items():
            if default is REQUIRED and key not in values:
                raise ConfigError(f"missing required key {key!r}")
        resolved = {k: (values[k] if k in values else d) for k, (_, d) in SCHEMA.items()}
        return cls(resolved, Path(out_dir), verbosity, set(values))

    @classmethod
    def load(cls, path, out_dir=".", verbosity=0) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text()
        if path.suffix == ".json":
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
            values = parse_mapping(data.get("config", data), str(path))
        else:
            values = parse_text(text, str(path))
        return cls.from_values(values, out_dir, verbosity)

    def __getitem__(self, key):
        return self.values[key]

    def resolved(self) -> dict:
        return dict(sorted(self.values.items()))

    # builders ------------------------------------------------------------
    def medium_spec(self) -> MediumSpec:
        v = self.values
        spec = MediumSpec(
            kind=v["medium.kind"],
            dimension=v["medium.dimension"],
            a_range=v["medium.a_range"],
            b_range=v["medium.b_range"],
            gamma_range=v["medium.gamma_range"],
            modes=v["medium.modes"],
            frequencies=v["medium.frequencies"],
            amplitudes=v["medium.amplitudes"],
            period=v["medium.period"],
            freq_band=v["medium.freq_band"],
            atoms=v["medium.atoms"],
            weights=v["medium.weights"],
        )
        return spec.validate()

    def profile(self) -> Profile:
        v = self.values
        return Profile(v["experiment.profile"], v["experiment.amplitude"], v["experiment.center"], v["experiment.width"])

    def solver_config(self) -> SolverConfig:
        v = self.values
        return SolverConfig(
            dt=v["solver.dt"],
            t_end=v["solver.t_end"],
            newton_tol=v["solver.newton_tol"],
            newton_max=v["solver.newton_max"],
            bc=v["solver.bc"],
            p_bc=v["solver.p_bc"],
        )

    def n_cells(self) -> int:
        v = self.values
        if v["solver.n"] is not None:
            return v["solver.n"]
        n = v["solver.L"] / v["solver.eps"] * v["solver.cells_per_eps"]
        return max(int(math.ceil(n - 1e-9)), 4)

    def homogenization(self) -> HomogenizationConfig:
        v = self.values
        return HomogenizationConfig(
            medium=self.medium_spec(),
            profile=self.profile(),
            eps_list=tuple(v["experiment.eps_list"]),
            M=v["experiment.M"],
            seed0=v["medium.seed"],
            L=v["solver.L"],
            cells_per_eps=int(v["solver.cells_per_eps"]),
            t_end=v["solver.t_end"],
            dt=v["solver.dt"],
            n_snapshots=v["solver.snapshots"],
            n_hom=v["experiment.n_hom"],
            mc_M=v["flux.M"],
            flux_method=v["flux.method"],
            n_quad=v["flux.n_quad"],
            p_nodes=v["flux.p_nodes"],
            test_center=v["experiment.test_center"],
            test_width=v["experiment.test_width"],
        ).validate()
