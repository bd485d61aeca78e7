"""PNG figures for run reports (energy history, shapes, fronts)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Circle, Polygon  # noqa: E402

import numpy as np  # noqa: E402

plt.rcParams.update({"font.size": 9, "axes.spines.top": False, "axes.spines.right": False})


def plot_energy(history, path, title: str | None = None) -> Path:
    t = np.array([r.t for r in history])
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.plot(t, [r.e_pot for r in history], label="potential")
    ax.plot(t, [r.e_kin for r in history], label="kinetic")
    ax.plot(t, [r.e_tot for r in history], "k--", lw=0.8, label="total")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def _draw_shape(ax, mesh, **kw):
    ax.add_patch(Polygon(mesh.outline(), closed=True, **kw))


def plot_shapes(meshes, circle, path, labels=None, title: str | None = None) -> Path:
    """Overlay of shape outlines with the obstacle at true scale."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    colors = plt.cm.viridis(np.linspace(0, 0.9, max(len(meshes), 1)))
    for i, mesh in enumerate(meshes):
        lab = labels[i] if labels is not None else None
        _draw_shape(ax, mesh, fill=False, ec=colors[i], lw=1.2, label=lab)
    if circle is not None:
        ax.add_patch(Circle(circle.midpoint, circle.radius, fc="#fcbba1", ec="#cb181d"))
    pts = np.vstack([m.nodes for m in meshes])
    ax.set_xlim(pts[:, 0].min() - 0.05, pts[:, 0].max() + 0.05)
    ax.set_ylim(min(pts[:, 1].min(), 0.0) - 0.05, pts[:, 1].max() + 0.05)
    ax.set_aspect("equal")
    if labels is not None:
        ax.legend(frameon=False, fontsize=7, loc="best")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_fronts(fronts: dict, path, anchors: dict | None = None) -> Path:
    """``fronts`` maps a label to a list of FrontPoint."""
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    for label, pts in fronts.items():
        pts = sorted(pts, key=lambda p: p.j2)
        ax.plot([p.j2 for p in pts], [p.j1 for p in pts], "o-", ms=3, label=label)
    for label, (j1, j2) in (anchors or {}).items():
        ax.plot([j2], [j1], "kx")
        ax.annotate(label, (j2, j1), fontsize=7, xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel("$J_2$ (area)")
    ax.set_ylabel("$J_1$ (failure)")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
