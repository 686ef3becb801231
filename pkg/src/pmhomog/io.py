"""CSV / JSON artifacts and the dependency-free SVG line plot.

Floats are written with ``repr`` (shortest round-trip form), so files reload
bit-identically and repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .effective import EffectiveFlux
from .errors import ConfigError


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# effective flux


def write_effective_flux(path, eff: EffectiveFlux) -> Path:
    """Columns ``p, gbar, stderr`` plus ``dgbar`` (node slopes of the interpolant)."""
    header = ["p", "gbar", "stderr"]
    cols = [eff.p_grid, eff.gbar_values, eff.stderr]
    if eff.dgbar_values is not None:
        header.append("dgbar")
        cols.append(eff.dgbar_values)
    return write_csv(path, header, zip(*cols))


def read_effective_flux(path) -> EffectiveFlux:
    header, rows = read_csv(path)
    if header[:3] != ["p", "gbar", "stderr"]:
        raise ConfigError(f"{path}: expected columns p, gbar, stderr")
    data = np.array([[float(v) for v in r] for r in rows])
    dgbar = data[:, 3] if "dgbar" in header else None
    return EffectiveFlux(data[:, 0], data[:, 1], data[:, 2], dgbar, None, "table")


# ---------------------------------------------------------------------------
# trajectories and kinetic defects


def write_trajectory(directory, traj) -> dict:
    directory = Path(directory)
    x = traj.grid.centers
    rows = ((t, xi, ui) for t, u in zip(traj.times, traj.values) for xi, ui in zip(x, u))
    write_csv(directory / "trajectory.csv", ["t", "x", "u"], rows)
    write_csv(directory / "mass.csv", ["t", "mass"], zip(traj.times, traj.mass()))
    manifest = {
        "grid": {"L": traj.grid.L, "n": traj.grid.n, "h": traj.grid.h},
        "config": {k: getattr(traj.config, k) for k in ("dt", "t_end", "newton_tol", "newton_max", "bc", "p_bc")},
        "provenance": traj.provenance,
        "stats": traj.stats,
        "n_snapshots": len(traj),
    }
    write_json(directory / "manifest.json", manifest)
    return manifest


def read_trajectory_csv(path):
    """``(times, x, values)`` from a long-format trajectory CSV."""
    _, rows = read_csv(path)
    data = np.array([[float(v) for v in r] for r in rows])
    times = np.unique(data[:, 0])
    x = data[data[:, 0] == times[0], 1]
    return times, x, data[:, 2].reshape(times.size, x.size)


def write_defect(path, kd, report) -> Path:
    return write_csv(path, ["p_mid", "n", "eta0", "slack"], zip(kd.p_mid, kd.n_values, kd.eta0_values, report.slack))


# ---------------------------------------------------------------------------
# SVG


def svg_line_plot(path, series: dict, xlabel: str, ylabel: str, title: str = "", logx=True, logy=True, size=(480, 360)) -> Path:
    """Write one ``<polyline>`` per series; non-positive values are skipped on log axes."""
    W, H = size
    ml, mr, mt, mb = 64, 16, 28, 48
    pts = {}
    for name, (xs, ys) in series.items():
        xs, ys = np.asarray(xs, float), np.asarray(ys, float)
        keep = np.isfinite(xs) & np.isfinite(ys)
        if logx:
            keep &= xs > 0
        if logy:
            keep &= ys > 0
        tx = np.log10(xs[keep]) if logx else xs[keep]
        ty = np.log10(ys[keep]) if logy else ys[keep]
        pts[name] = (tx, ty)
    allx = np.concatenate([v[0] for v in pts.values()] or [np.zeros(1)])
    ally = np.concatenate([v[1] for v in pts.values()] or [np.zeros(1)])
    if allx.size == 0:
        allx = np.zeros(1)
    if ally.size == 0:
        ally = np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * (W - ml - mr)

    def sy(v):
        return H - mb - (v - y0) / (y1 - y0) * (H - mt - mb)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{ml}" y1="{H - mb}" x2="{W - mr}" y2="{H - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{H - mb}" stroke="black"/>',
        f'<text x="{(W + ml - mr) / 2:.1f}" y="{H - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{(H - mb + mt) / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {(H - mb + mt) / 2:.1f})">{escape(ylabel)}</text>',
    ]
    if title:
        out.append(f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    for lab, v, anchor in ((x0, x0, "start"), (x1, x1, "end")):
        txt = f"1e{lab:.2f}" if logx else f"{lab:.3g}"
        out.append(f'<text x="{sx(v):.1f}" y="{H - mb + 14}" text-anchor="{anchor}" font-size="10">{escape(txt)}</text>')
    for lab in (y0, y1):
        txt = f"1e{lab:.2f}" if logy else f"{lab:.3g}"
        out.append(f'<text x="{ml - 4}" y="{sy(lab) + 4:.1f}" text-anchor="end" font-size="10">{escape(txt)}</text>')
    for k, (name, (tx, ty)) in enumerate(pts.items()):
        c = colors[k % len(colors)]
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(tx, ty))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{coords}"><title>{escape(name)}</title></polyline>')
        out.append(f'<text x="{W - mr - 4}" y="{mt + 14 * (k + 1)}" text-anchor="end" font-size="11" fill="{c}">{escape(name)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path
