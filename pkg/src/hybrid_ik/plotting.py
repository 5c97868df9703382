"""Matplotlib figures written to files (Agg backend, no display needed)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_coverage(samples, region, path, title: str = "") -> Path:
    """Scatter of drawn table positions: accepted green, rejected red.

    Axes follow the table seen from above with the robot at the bottom
    (x forward, drawn upwards; y to the left).
    """
    acc = np.array([s.target_xy for s in samples if s.accepted]).reshape(-1, 2)
    rej = np.array([s.target_xy for s in samples if not s.accepted]).reshape(-1, 2)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(-rej[:, 1], rej[:, 0], s=6, c="tab:red", label=f"rejected ({len(rej)})")
    ax.scatter(-acc[:, 1], acc[:, 0], s=6, c="tab:green", label=f"accepted ({len(acc)})")
    ax.set_xlim(-region.y_max, -region.y_min)
    ax.set_ylim(region.x_min, region.x_max)
    ax.set_xlabel("-y [m]")
    ax.set_ylabel("x [m]")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_error_distribution(records, path) -> Path:
    """Box plots of position and orientation error per solver (log scale)."""
    solvers = list(dict.fromkeys(r["solver"] for r in records))
    floor = 1e-12
    pos = [[max(r["position_error"], floor) for r in records if r["solver"] == s] for s in solvers]
    ori = [[max(r["orientation_error_sum"], floor) for r in records if r["solver"] == s]
           for s in solvers]
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
    a1.boxplot(pos, showfliers=True)
    a1.set_yscale("log")
    a1.set_ylabel("position error [m]")
    a1.axhline(0.010, ls="--", c="grey", lw=0.8)
    a2.boxplot(ori, showfliers=True)
    a2.set_yscale("log")
    a2.set_ylabel("orientation error, |r|+|p|+|y| [deg]")
    a2.axhline(20.0, ls="--", c="grey", lw=0.8)
    for ax in (a1, a2):
        ax.set_xticks(range(1, len(solvers) + 1), solvers)
    fig.tight_layout()
    return _save(fig, path)


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
