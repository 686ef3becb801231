"""Command line: ``pmhomog {effective-flux,solve,homogenize,kinetic-check}``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 a property
check reported FAIL.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig
from .effective import check_fbar_properties, default_p_grid, effective_g
from .errors import ConfigError, PMHError, PropertyCheckFailure
from .experiment import run_homogenization
from .kinetic import Bump, SpaceTimeTest, check_defect_bound, defect_histogram, entropy_identity_gap, kinetic_residual
from .medium import sample_realization
from .solver import SolverConfig, Grid1D, assemble_coefficients, solve, well_prepared_initial

logger = logging.getLogger("pmhomog")


def _threads(arg: int | None) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get("PMH_THREADS", "").strip()
        try:
            n = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"PMH_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


def _p_grid(rc: RunConfig) -> np.ndarray:
    n = rc["flux.p_nodes"]
    if rc["flux.p_max"] is not None:
        return np.linspace(-rc["flux.p_max"], rc["flux.p_max"], n)
    lo, hi = rc.profile().bounds()
    return default_p_grid(max(abs(lo), abs(hi), 1e-12), n=n)


def cmd_effective_flux(rc: RunConfig, plot: bool = False) -> dict:
    spec = rc.medium_spec()
    eff = effective_g(spec, _p_grid(rc), M=rc["flux.M"], seed0=rc["medium.seed"], method=rc["flux.method"], n_quad=rc["flux.n_quad"])
    v = np.linspace(-rc["flux.v_max"], rc["flux.v_max"], rc["flux.v_points"])
    rep = check_fbar_properties(eff, v)
    out = rc.out_dir
    io.write_effective_flux(out / "gbar.csv", eff)
    io.write_csv(out / "fbar.csv", ["v", "fbar"], zip(v, eff.fbar(v)))
    summary = {
        "method": eff.method,
        "p_nodes": int(eff.p_grid.size),
        "p_range": [float(eff.p_grid[0]), float(eff.p_grid[-1])],
        "stderr_max": float(np.max(eff.stderr)),
        "fbar_at_1": float(eff.fbar(1.0)),
        "monotone": rep.monotone,
        "violations": rep.violations,
        "lipschitz": rep.lipschitz,
        "v_range": [rep.v_min, rep.v_max],
        "config": rc.resolved(),
    }
    io.write_json(out / "summary.json", summary)
    if plot:
        from .plotting import plot_effective_flux

        plot_effective_flux(eff, out / "effective_flux.png", rc["flux.v_max"])
    print(f"effective flux ({eff.method}, {eff.p_grid.size} nodes): fbar(1) = {summary['fbar_at_1']:.10g}")
    print(f"monotone={rep.monotone} violations={rep.violations} lipschitz={rep.lipschitz:.6g} on [{rep.v_min:g}, {rep.v_max:g}]")
    if not rep.monotone:
        raise PropertyCheckFailure("effective flux is not strictly increasing on the check grid")
    return summary


def _heterogeneous(rc: RunConfig, record_every_step: bool):
    spec = rc.medium_spec()
    r = sample_realization(spec, rc["medium.seed"])
    grid = Grid1D(rc["solver.L"], rc.n_cells())
    coeffs = assemble_coefficients(r, rc["solver.eps"], grid)
    prof = rc.profile()
    cfg = rc.solver_config()
    if "solver.p_bc" not in rc.explicit and not prof.compact:
        # far field of a constant profile is its own stationary state
        cfg = SolverConfig(cfg.dt, cfg.t_end, cfg.newton_tol, cfg.newton_max, cfg.bc, prof.amplitude)
    u0 = well_prepared_initial(coeffs, prof, grid, prof.compact and cfg.bc != "periodic")
    snaps = None if record_every_step else np.linspace(0.0, cfg.t_end, rc["solver.snapshots"])
    traj = solve(u0, coeffs, cfg, snaps)
    return coeffs, prof, traj


def cmd_solve(rc: RunConfig, plot: bool = False) -> dict:
    coeffs, _, traj = _heterogeneous(rc, record_every_step=False)
    manifest = io.write_trajectory(rc.out_dir, traj)
    manifest["config"] = rc.resolved()
    io.write_json(rc.out_dir / "manifest.json", manifest)
    if plot:
        from .plotting import plot_trajectory

        plot_trajectory(traj, rc.out_dir / "trajectory.png")
    m = traj.mass()
    print(f"solved {traj.grid.n} cells to t={traj.times[-1]:g}: {traj.stats['steps']} steps, mass drift {abs(m[-1] - m[0]):.3e}")
    return manifest


def cmd_homogenize(rc: RunConfig, threads: int = 1, plot: bool = False) -> dict:
    hc = rc.homogenization()
    report = run_homogenization(hc, threads=threads)
    timing = rc["output.record_timing"]
    rows = report.row_dicts()
    cols = ["epsilon", "E_mean", "E_stderr", "W", "n_cells", "wall_ms", "pass"]
    io.write_csv(
        rc.out_dir / "report.csv",
        cols,
        ([d[c] if (c != "wall_ms" or timing) else None for c in cols] for d in rows),
    )
    io.write_effective_flux(rc.out_dir / "effective_flux.csv", report.eff)
    payload = {
        "config": rc.resolved(),
        "rows": [{k: v for k, v in d.items() if k != "wall_ms" or timing} for d in rows],
        "passed": report.passed,
        "monotone": report.monotone,
        "ratio": report.ratio,
        "weak_ratio": report.weak_ratio,
        "effective_flux": {"file": "effective_flux.csv", "method": report.eff.method, "nodes": int(report.eff.p_grid.size)},
    }
    io.write_json(rc.out_dir / "report.json", payload)
    if plot:
        from .plotting import plot_convergence

        eps = [r.epsilon for r in report.rows]
        io.svg_line_plot(
            rc.out_dir / "plot.svg",
            {"E": (eps, [r.E_mean for r in report.rows]), "W": (eps, [r.W for r in report.rows])},
            "log10 eps",
            "log10 error",
            "homogenization sweep",
        )
        plot_convergence(report, rc.out_dir / "convergence.png")
    for d in rows:
        print(f"eps={d['epsilon']:.6g} E={d['E_mean']:.4e} +- {d['E_stderr']:.2e} W={d['W']:.4e} cells={d['n_cells']}")
    print(f"{'PASS' if report.passed else 'FAIL'}: monotone={report.monotone} E ratio={report.ratio:.4g} W ratio={report.weak_ratio:.4g}")
    if not report.passed:
        raise PropertyCheckFailure("E(eps) trend check failed")
    return payload


def cmd_kinetic_check(rc: RunConfig, plot: bool = False) -> dict:
    coeffs, prof, traj = _heterogeneous(rc, record_every_step=True)
    lo, hi = prof.bounds()
    P = 1.1 * max(abs(lo), abs(hi), 1e-12)
    bins = rc["experiment.p_bins"]
    if bins < 2 or bins % 2:
        raise ConfigError("experiment.p_bins must be an even integer >= 2")
    kd = defect_histogram(traj, coeffs, np.linspace(-P, P, bins + 1), prof)
    factor = rc["experiment.inject_defect_factor"]
    if factor != 1.0:
        logger.warning("inflating the defect histogram by %g (checker sanity run)", factor)
        kd = kd.inflated(factor)
    rep = check_defect_bound(kd)

    T = traj.times[-1]
    c, w = prof.center, prof.width
    test = SpaceTimeTest(Bump(c, min(2.0 * w, 0.45 * rc["solver.L"])), Bump(0.5 * T, 0.45 * T) if T > 0 else None)
    xi = Bump(rc["experiment.xi_center"], rc["experiment.xi_width"])
    p_quad = np.linspace(xi.support[0], xi.support[1], 801)
    residual = kinetic_residual(traj, coeffs, test, xi, p_quad)
    gap = entropy_identity_gap(traj, coeffs, rc["experiment.kinetic_p"], rc["experiment.sigma"], test)

    io.write_defect(rc.out_dir / "defect.csv", kd, rep)
    payload = {
        "passed": rep.passed,
        "max_violation": rep.max_violation,
        "tol_bin": rep.tol_bin,
        "allowance": rep.allowance,
        "worst_bin_p": float(kd.p_mid[rep.worst_bin]),
        "total_mass": kd.total_mass,
        "outside_mass": kd.outside_mass,
        "inject_defect_factor": factor,
        "kinetic_residual": residual,
        "entropy_gap": gap,
        "config": rc.resolved(),
    }
    io.write_json(rc.out_dir / "kinetic.json", payload)
    if plot:
        from .plotting import plot_defect

        plot_defect(kd, rc.out_dir / "defect.png")
    print(f"defect bound {'PASS' if rep.passed else 'FAIL'}: max(n - eta0) = {rep.max_violation:.4e}, tol_bin = {rep.tol_bin:.4e}")
    print(f"kinetic residual |R| = {residual:.4e}, entropy gap = {gap:.4e}")
    if not rep.passed:
        raise PropertyCheckFailure("defect histogram exceeds eta0 + tol_bin")
    return payload


COMMANDS = {
    "effective-flux": cmd_effective_flux,
    "solve": cmd_solve,
    "homogenize": cmd_homogenize,
    "kinetic-check": cmd_kinetic_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="flat key = value file (or a report.json)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=None, help="worker threads (fallback: $PMH_THREADS, then 1)")
    common.add_argument("--plot", action="store_true", help="also write figures")
    common.add_argument("-v", "--verbose", action="count", default=0)
    parser = argparse.ArgumentParser(prog="pmhomog", description="Homogenization of porous-medium type equations.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        out = Path(args.out)
        rc = RunConfig.load(args.config, out, args.verbose)
        out.mkdir(parents=True, exist_ok=True)
        plot = args.plot or rc["output.plot"]
        if args.command == "homogenize":
            cmd_homogenize(rc, threads=_threads(args.threads), plot=plot)
        else:
            _threads(args.threads)
            COMMANDS[args.command](rc, plot=plot)
    except PMHError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
