# simulator/plot.py
from __future__ import annotations
import pathlib

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .scene import SyntheticScene
from .trajectory import Trajectory


def plot_trajectory(scene: SyntheticScene, trajectory: Trajectory, output_path: str | pathlib.Path,
                    title: str | None = None, max_points: int = 20000) -> pathlib.Path:
    """上から見た (x, z) 平面にシーン点・カメラ位置・視線・revisit ペアを描く"""
    fig, ax = plt.subplots(figsize=(8, 8), dpi=120)

    # === シーン点 ==========================================================
    pts, cols = scene.points, scene.colors
    if len(pts) > max_points:
        sel = np.random.default_rng(scene.seed).choice(len(pts), max_points, replace=False)
        pts, cols = pts[sel], cols[sel]
    ax.scatter(pts[:, 0], pts[:, 2], c=cols, s=1, linewidths=0)

    # === カメラ ============================================================
    centers = trajectory.centers()
    ax.plot(centers[:, 0], centers[:, 2], "k.-", linewidth=0.8, markersize=4)
    span = max(float(np.ptp(centers[:, [0, 2]])) if len(centers) > 1 else 0.0, 1.0)
    for cam, c in zip(trajectory.cameras, centers):
        fwd = cam.pose.rotation[2] * 0.08 * span
        ax.arrow(c[0], c[2], fwd[0], fwd[2], head_width=0.02 * span, color="tab:blue")
    ax.plot(centers[0, 0], centers[0, 2], "go", label="start")

    for a, b in trajectory.revisit_pairs:
        ax.plot([centers[a, 0], centers[b, 0]], [centers[a, 2], centers[b, 2]],
                color="tab:red", linewidth=0.6, alpha=0.7)

    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.set_title(title or f"{trajectory.kind} ({len(trajectory)} frames, "
                          f"{len(trajectory.revisit_pairs)} revisit pairs)")
    ax.legend(loc="upper right")
    plt.tight_layout()

    out = pathlib.Path(output_path)
    fig.savefig(out)
    plt.close(fig)
    return out
