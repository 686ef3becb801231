"""Matplotlib figures for CLI reports (written to files, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_convergence(report, path) -> Path:
    """log-log E(eps) with stderr bars, and the weak-star pairing error."""
    eps = np.array([r.epsilon for r in report.rows])
    E = np.array([r.E_mean for r in report.rows])
    se = np.array([r.E_stderr for r in report.rows])
    W = np.array([r.W for r in report.rows])
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 3.4))
        ax.errorbar(eps, E, yerr=se, marker="o", capsize=3, label="E(eps)")
        ax.plot(eps, np.where(W > 0, W, np.nan), marker="s", ls="--", label="W(eps)")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("eps")
        ax.set_ylabel("error")
        ax.set_title("PASS" if report.passed else "FAIL")
        ax.legend()
        return _save(fig, path)


def plot_trajectory(traj, path, n_curves: int = 6) -> Path:
    x = traj.grid.centers
    idx = np.unique(np.linspace(0, len(traj) - 1, min(n_curves, len(traj))).round().astype(int))
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.2))
        cmap = plt.get_cmap("viridis")
        for j, k in enumerate(idx):
            ax1.plot(x, traj.values[k], color=cmap(j / max(len(idx) - 1, 1)), lw=1.0, label=f"t={traj.times[k]:.3g}")
        ax1.set_xlabel("x")
        ax1.set_ylabel("u")
        ax1.legend()
        m = traj.mass()
        ax2.plot(traj.times, m - m[0], marker=".")
        ax2.set_xlabel("t")
        ax2.set_ylabel("mass drift")
        return _save(fig, path)


def plot_effective_flux(eff, path, v_max: float = 2.0) -> Path:
    v = np.linspace(-v_max, v_max, 401)
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.2))
        ax1.plot(eff.p_grid, eff.gbar_values)
        ax1.set_xlabel("p")
        ax1.set_ylabel("gbar(p)")
        ax2.plot(v, eff.fbar(v))
        ax2.set_xlabel("v")
        ax2.set_ylabel("fbar(v)")
        return _save(fig, path)


def plot_defect(kd, path) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 3.4))
        ax.stairs(kd.n_values, kd.p_edges, label="n (histogram)")
        ax.plot(kd.p_mid, kd.eta0_values, marker=".", label="eta0")
        ax.set_xlabel("p")
        ax.set_ylabel("density")
        ax.legend()
        return _save(fig, path)
