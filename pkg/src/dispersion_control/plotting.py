"""Report figures rendered next to the CSV output of a run."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sim import DEAD, NON_COOPERATIVE, TrajectoryLog  # noqa: E402

__all__ = ["plot_trajectories", "plot_errors", "plot_estimates", "render_report"]


def _clean(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    return ax


def plot_trajectories(log: TrajectoryLog, ax=None):
    """Initial (green) and final (red) positions with their paths."""
    if ax is None:
        _, ax = plt.subplots(figsize=(7, 5))
    P = log.positions
    status = log.status[-1]
    for i in range(P.shape[1]):
        if status[i] == NON_COOPERATIVE:
            ax.plot(P[:, i, 0], P[:, i, 1], color="k", lw=0.6, alpha=0.5)
        else:
            ax.plot(P[:, i, 0], P[:, i, 1], color="tab:red", lw=0.5, alpha=0.4)
    ax.scatter(P[0, :, 0], P[0, :, 1], s=10, color="tab:green", label="initial", zorder=3)
    alive = status != DEAD
    ax.scatter(P[-1, alive, 0], P[-1, alive, 1], s=10, color="tab:red", label="final", zorder=3)
    if (~alive).any():
        ax.scatter(P[-1, ~alive, 0], P[-1, ~alive, 1], marker="x", color="lightcoral", label="dead", zorder=3)
    nc = status == NON_COOPERATIVE
    if nc.any():
        ax.scatter(P[-1, nc, 0], P[-1, nc, 1], s=16, color="k", label="non-cooperative", zorder=4)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(frameon=False, fontsize=8)
    return _clean(ax)


def plot_errors(log: TrajectoryLog, ax=None):
    """Spectral error of the swarm and, if distributed, of every agent's estimate."""
    if ax is None:
        _, ax = plt.subplots(figsize=(7, 3.5))
    t = log.t
    tgt = log.target.as_array()
    if log.mode == "distributed":
        e_i = np.linalg.norm(log.lam_agents - tgt, axis=2)
        e_i = np.where(log.status == 0, e_i, np.nan)
        ax.semilogy(t, e_i, color="tab:blue", lw=0.4, alpha=0.3)
    ax.semilogy(t, np.maximum(log.e_norm, 1e-16), color="k", lw=1.5, label=r"$\|e_\lambda\|$ (true C)")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("spectral error")
    ax.legend(frameon=False, fontsize=8)
    return _clean(ax)


def plot_estimates(log: TrajectoryLog, axes=None):
    """Per-agent centroid and covariance estimates."""
    if axes is None:
        _, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    t = log.t
    for i in range(log.p_hat.shape[1]):
        dead = log.status[:, i] == DEAD
        c = "lightcoral" if dead[-1] else "tab:blue"
        axes[0].plot(t, log.p_hat[:, i, 0], color=c, lw=0.4, alpha=0.5)
        axes[0].plot(t, log.p_hat[:, i, 1], color="tab:orange", lw=0.4, alpha=0.5)
        for j, col in enumerate(("tab:purple", "tab:olive", "tab:cyan")):
            axes[1].plot(t, log.c_hat[:, i, j], color=col, lw=0.4, alpha=0.5)
    axes[0].set_ylabel(r"$\hat p_i$")
    axes[1].set_ylabel(r"$\hat c_i$")
    axes[1].set_xlabel("t [s]")
    for ax in axes:
        _clean(ax)
    return axes


def render_report(log: TrajectoryLog, out_dir) -> list[Path]:
    """Write the standard figure set; returns the written paths."""
    out_dir = Path(out_dir)
    written = []

    fig, ax = plt.subplots(figsize=(7, 5))
    plot_trajectories(log, ax)
    p = out_dir / "trajectories.png"
    fig.savefig(p, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(p)

    fig, ax = plt.subplots(figsize=(7, 3.5))
    plot_errors(log, ax)
    p = out_dir / "spectral_error.png"
    fig.savefig(p, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(p)

    if log.mode == "distributed":
        fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
        plot_estimates(log, axes)
        p = out_dir / "estimates.png"
        fig.savefig(p, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(p)
    return written
